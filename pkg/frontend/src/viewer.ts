/**
 * Three.js scene for the ground-removed global cloud.
 *
 * World frame is z-up. Points are colored by bounding-box membership in
 * the cluster list (lowest id wins on overlap, unclustered points gray).
 * Clicking a cluster wireframe selects it; in draw mode, dragging on the
 * ground plane sketches a rectangle that is extruded upward into the box
 * sent to the service.
 */

import * as THREE from 'three';
import { OrbitControls } from 'three/examples/jsm/controls/OrbitControls.js';

import { clusterColor, UNCLUSTERED } from './colors.js';
import { BBox, ClusterInfo, boxContains } from './types.js';

export interface ViewerCallbacks {
  onSelect(id: number | null): void;
  onBoxDrawn(box: BBox): void;
}

const POINT_SIZE = 0.035;
const SELECTED_COLOR = 0xffffff;

export class CloudViewer {
  private readonly scene = new THREE.Scene();
  private readonly camera: THREE.PerspectiveCamera;
  private readonly renderer: THREE.WebGLRenderer;
  private readonly controls: OrbitControls;
  private readonly raycaster = new THREE.Raycaster();
  private readonly groundPlane = new THREE.Plane(new THREE.Vector3(0, 0, 1), 0);

  private positions: Float32Array = new Float32Array(0);
  private points: THREE.Points | null = null;
  private boxGroup = new THREE.Group();
  private pickGroup = new THREE.Group();
  private clusters: ClusterInfo[] = [];
  private selectedId: number | null = null;

  private drawMode = false;
  private drawStart: THREE.Vector3 | null = null;
  private preview: THREE.Mesh | null = null;

  boxHeight = 4.0;

  constructor(private readonly container: HTMLElement,
              private readonly callbacks: ViewerCallbacks) {
    this.scene.background = new THREE.Color(0x14171c);
    this.camera = new THREE.PerspectiveCamera(55, 1, 0.05, 500);
    this.camera.up.set(0, 0, 1);
    this.camera.position.set(-9, -9, 9);

    this.renderer = new THREE.WebGLRenderer({ antialias: true });
    container.appendChild(this.renderer.domElement);

    this.controls = new OrbitControls(this.camera, this.renderer.domElement);
    this.controls.target.set(8, 0, 1);
    this.controls.enableDamping = true;

    this.scene.add(new THREE.GridHelper(60, 60, 0x2c3340, 0x22272f)
      .rotateX(Math.PI / 2));
    this.scene.add(this.boxGroup);
    this.scene.add(this.pickGroup);

    const canvas = this.renderer.domElement;
    canvas.addEventListener('pointerdown', (e) => this.onPointerDown(e));
    canvas.addEventListener('pointermove', (e) => this.onPointerMove(e));
    canvas.addEventListener('pointerup', (e) => this.onPointerUp(e));
    new ResizeObserver(() => this.resize()).observe(container);
    this.resize();
    this.renderer.setAnimationLoop(() => {
      this.controls.update();
      this.renderer.render(this.scene, this.camera);
    });
  }

  setCloud(positions: Float32Array): void {
    this.positions = positions;
    if (this.points) {
      this.scene.remove(this.points);
      this.points.geometry.dispose();
    }
    const geometry = new THREE.BufferGeometry();
    geometry.setAttribute('position', new THREE.BufferAttribute(positions, 3));
    geometry.setAttribute('color',
      new THREE.BufferAttribute(new Float32Array(positions.length), 3));
    const material = new THREE.PointsMaterial({
      size: POINT_SIZE, vertexColors: true, sizeAttenuation: true,
    });
    this.points = new THREE.Points(geometry, material);
    this.scene.add(this.points);
    this.recolor();
  }

  setClusters(clusters: ClusterInfo[]): void {
    this.clusters = [...clusters].sort((a, b) => a.id - b.id);
    this.rebuildBoxes();
    this.recolor();
  }

  setSelected(id: number | null): void {
    this.selectedId = id;
    this.rebuildBoxes();
  }

  setDrawMode(on: boolean): void {
    this.drawMode = on;
    this.controls.enabled = !on || this.drawStart === null;
    if (!on) this.clearPreview();
    this.container.style.cursor = on ? 'crosshair' : 'default';
  }

  get isDrawMode(): boolean {
    return this.drawMode;
  }

  /** Color every point by the lowest-id cluster box containing it. */
  private recolor(): void {
    if (!this.points) return;
    const colors = this.points.geometry.getAttribute('color') as THREE.BufferAttribute;
    const array = colors.array as Float32Array;
    const n = this.positions.length / 3;
    for (let i = 0; i < n; i++) {
      const x = this.positions[i * 3];
      const y = this.positions[i * 3 + 1];
      const z = this.positions[i * 3 + 2];
      let rgb = UNCLUSTERED;
      for (const cluster of this.clusters) {
        if (boxContains(cluster.bbox, x, y, z)) {
          rgb = clusterColor(cluster.id);
          break;
        }
      }
      array[i * 3] = rgb[0];
      array[i * 3 + 1] = rgb[1];
      array[i * 3 + 2] = rgb[2];
    }
    colors.needsUpdate = true;
  }

  private rebuildBoxes(): void {
    this.boxGroup.clear();
    this.pickGroup.clear();
    for (const cluster of this.clusters) {
      const [ex, ey, ez] = cluster.bbox.extents;
      const geometry = new THREE.BoxGeometry(Math.max(ex, 0.05),
                                             Math.max(ey, 0.05),
                                             Math.max(ez, 0.05));
      const selected = cluster.id === this.selectedId;
      const color = selected ? SELECTED_COLOR
        : new THREE.Color(...clusterColor(cluster.id)).getHex();
      const edges = new THREE.LineSegments(
        new THREE.EdgesGeometry(geometry),
        new THREE.LineBasicMaterial({ color, linewidth: selected ? 2 : 1 }));
      edges.position.set(...cluster.bbox.center);
      this.boxGroup.add(edges);

      const pick = new THREE.Mesh(geometry,
        new THREE.MeshBasicMaterial({ visible: false }));
      pick.position.set(...cluster.bbox.center);
      pick.userData.clusterId = cluster.id;
      this.pickGroup.add(pick);
    }
  }

  private pointerRay(event: PointerEvent): THREE.Raycaster {
    const rect = this.renderer.domElement.getBoundingClientRect();
    const ndc = new THREE.Vector2(
      ((event.clientX - rect.left) / rect.width) * 2 - 1,
      -((event.clientY - rect.top) / rect.height) * 2 + 1);
    this.raycaster.setFromCamera(ndc, this.camera);
    return this.raycaster;
  }

  private groundPoint(event: PointerEvent): THREE.Vector3 | null {
    const hit = new THREE.Vector3();
    return this.pointerRay(event).ray.intersectPlane(this.groundPlane, hit)
      ? hit : null;
  }

  private onPointerDown(event: PointerEvent): void {
    if (this.drawMode) {
      this.drawStart = this.groundPoint(event);
      this.controls.enabled = false;
      return;
    }
    const hits = this.pointerRay(event).intersectObjects(this.pickGroup.children);
    this.callbacks.onSelect(
      hits.length ? hits[0].object.userData.clusterId as number : null);
  }

  private onPointerMove(event: PointerEvent): void {
    if (!this.drawMode || !this.drawStart) return;
    const here = this.groundPoint(event);
    if (here) this.showPreview(this.drawStart, here);
  }

  private onPointerUp(event: PointerEvent): void {
    if (!this.drawMode || !this.drawStart) return;
    const end = this.groundPoint(event) ?? this.drawStart;
    const box = this.boxFromDrag(this.drawStart, end);
    this.drawStart = null;
    this.clearPreview();
    this.controls.enabled = true;
    if (box) this.callbacks.onBoxDrawn(box);
  }

  /** Ground rectangle extruded upward to boxHeight. */
  private boxFromDrag(a: THREE.Vector3, b: THREE.Vector3): BBox | null {
    const ex = Math.abs(a.x - b.x);
    const ey = Math.abs(a.y - b.y);
    if (ex < 0.05 || ey < 0.05) return null; // a stray click, not a drag
    return {
      center: [(a.x + b.x) / 2, (a.y + b.y) / 2, this.boxHeight / 2],
      extents: [ex, ey, this.boxHeight],
    };
  }

  private showPreview(a: THREE.Vector3, b: THREE.Vector3): void {
    this.clearPreview();
    const ex = Math.max(Math.abs(a.x - b.x), 0.01);
    const ey = Math.max(Math.abs(a.y - b.y), 0.01);
    this.preview = new THREE.Mesh(
      new THREE.BoxGeometry(ex, ey, this.boxHeight),
      new THREE.MeshBasicMaterial({ color: 0x4caf50, transparent: true,
                                    opacity: 0.25 }));
    this.preview.position.set((a.x + b.x) / 2, (a.y + b.y) / 2,
                              this.boxHeight / 2);
    this.scene.add(this.preview);
  }

  private clearPreview(): void {
    if (this.preview) {
      this.scene.remove(this.preview);
      this.preview.geometry.dispose();
      this.preview = null;
    }
  }

  private resize(): void {
    const w = this.container.clientWidth || 1;
    const h = this.container.clientHeight || 1;
    this.renderer.setSize(w, h);
    this.renderer.setPixelRatio(window.devicePixelRatio);
    this.camera.aspect = w / h;
    this.camera.updateProjectionMatrix();
  }
}
