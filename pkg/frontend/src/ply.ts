/**
 * Minimal parser for the binary little-endian PLY clouds served by the
 * review service (float properties on a single vertex element).
 */

const HEADER_END = 'end_header\n';

const PROPERTY_BYTES: Record<string, number> = {
  float: 4, float32: 4, double: 8, float64: 8,
  uchar: 1, uint8: 1, char: 1, int8: 1,
  short: 2, ushort: 2, int16: 2, uint16: 2,
  int: 4, uint: 4, int32: 4, uint32: 4,
};

export interface PlyCloud {
  count: number;
  /** xyzxyz... positions, length 3 * count */
  positions: Float32Array;
}

export function parsePly(buffer: ArrayBuffer): PlyCloud {
  const bytes = new Uint8Array(buffer);
  if (new TextDecoder('ascii').decode(bytes.subarray(0, 4)) !== 'ply\n') {
    throw new Error('not a PLY file');
  }
  const headerEnd = findHeaderEnd(bytes);
  const header = new TextDecoder('ascii').decode(bytes.subarray(0, headerEnd));
  const lines = header.split('\n');

  let count = -1;
  let inVertex = false;
  const props: Array<{ name: string; type: string; offset: number }> = [];
  let stride = 0;
  for (const raw of lines) {
    const tokens = raw.trim().split(/\s+/);
    if (tokens[0] === 'format') {
      if (tokens[1] !== 'binary_little_endian') {
        throw new Error(`unsupported PLY format: ${tokens[1]}`);
      }
    } else if (tokens[0] === 'element') {
      inVertex = tokens[1] === 'vertex';
      if (inVertex) count = parseInt(tokens[2], 10);
    } else if (tokens[0] === 'property' && inVertex) {
      const size = PROPERTY_BYTES[tokens[1]];
      if (size === undefined) throw new Error(`unsupported property type ${tokens[1]}`);
      props.push({ name: tokens[2], type: tokens[1], offset: stride });
      stride += size;
    }
  }
  if (count < 0) throw new Error('PLY header lacks a vertex element');

  const view = new DataView(buffer, headerEnd);
  if (view.byteLength < count * stride) {
    throw new Error('truncated PLY body');
  }
  const positions = new Float32Array(count * 3);
  const axes = ['x', 'y', 'z'].map((name) => {
    const prop = props.find((p) => p.name === name);
    if (!prop) throw new Error(`PLY vertex lacks property ${name}`);
    return prop;
  });
  for (let i = 0; i < count; i++) {
    const base = i * stride;
    for (let a = 0; a < 3; a++) {
      const prop = axes[a];
      positions[i * 3 + a] =
        prop.type === 'double' || prop.type === 'float64'
          ? view.getFloat64(base + prop.offset, true)
          : view.getFloat32(base + prop.offset, true);
    }
  }
  return { count, positions };
}

function findHeaderEnd(bytes: Uint8Array): number {
  const needle = new TextEncoder().encode(HEADER_END);
  outer: for (let i = 0; i + needle.length <= bytes.length && i < 65536; i++) {
    for (let j = 0; j < needle.length; j++) {
      if (bytes[i + j] !== needle[j]) continue outer;
    }
    return i + needle.length;
  }
  throw new Error('PLY header end not found');
}
