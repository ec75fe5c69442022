export type Vec3 = [number, number, number];

export interface BBox {
  center: Vec3;
  extents: Vec3;
}

export type ClusterSource = 'auto' | 'manual';

export interface ClusterInfo {
  id: number;
  point_count: number;
  bbox: BBox;
  source: ClusterSource;
}

export function boxContains(box: BBox, x: number, y: number, z: number): boolean {
  return (
    Math.abs(x - box.center[0]) <= box.extents[0] / 2 &&
    Math.abs(y - box.center[1]) <= box.extents[1] / 2 &&
    Math.abs(z - box.center[2]) <= box.extents[2] / 2
  );
}
