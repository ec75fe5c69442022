/**
 * Client for the review service HTTP API.
 *
 * Mutating requests go through a FIFO queue so the order of edits seen by
 * the server always matches the order the user made them in.
 */

import { parsePly } from './ply.js';
import { BBox, ClusterInfo } from './types.js';

export class ApiError extends Error {
  constructor(public readonly status: number, message: string) {
    super(message);
    this.name = 'ApiError';
  }
}

type FetchFn = typeof fetch;

export class ReviewApi {
  private queue: Promise<unknown> = Promise.resolve();

  constructor(
    private readonly baseUrl: string = '',
    private readonly fetchFn: FetchFn = (...args) => fetch(...args),
  ) {}

  async fetchClusters(): Promise<ClusterInfo[]> {
    const body = await this.requestJson('GET', '/api/clusters');
    return (body as { clusters: ClusterInfo[] }).clusters;
  }

  async fetchCloud(voxel?: number): Promise<Float32Array> {
    const query = voxel ? `?voxel=${voxel}` : '';
    const response = await this.fetchFn(`${this.baseUrl}/api/cloud${query}`);
    if (!response.ok) {
      throw new ApiError(response.status, `cloud fetch failed (${response.status})`);
    }
    return parsePly(await response.arrayBuffer()).positions;
  }

  deleteCluster(id: number): Promise<void> {
    return this.enqueue(async () => {
      await this.requestJson('DELETE', `/api/clusters/${id}`);
    });
  }

  addCluster(bbox: BBox): Promise<ClusterInfo> {
    return this.enqueue(async () => {
      const body = await this.requestJson('POST', '/api/clusters', { bbox });
      return (body as { cluster: ClusterInfo }).cluster;
    });
  }

  undo(): Promise<void> {
    return this.enqueue(async () => {
      await this.requestJson('POST', '/api/undo');
    });
  }

  commit(): Promise<number> {
    return this.enqueue(async () => {
      const body = await this.requestJson('POST', '/api/commit');
      return (body as { clusters: number }).clusters;
    });
  }

  /** Chain onto the edit queue; failures do not wedge later requests. */
  private enqueue<T>(task: () => Promise<T>): Promise<T> {
    const next = this.queue.then(task, task);
    this.queue = next.catch(() => undefined);
    return next;
  }

  private async requestJson(method: string, path: string,
                            payload?: unknown): Promise<unknown> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, {
      method,
      headers: payload === undefined
        ? undefined : { 'Content-Type': 'application/json' },
      body: payload === undefined ? undefined : JSON.stringify(payload),
    });
    if (!response.ok) {
      let detail = `${method} ${path} failed (${response.status})`;
      try {
        const body = await response.json() as { detail?: string };
        if (body.detail) detail = body.detail;
      } catch {
        // keep the generic message
      }
      throw new ApiError(response.status, detail);
    }
    return response.json();
  }
}
