import { describe, expect, it } from 'vitest';

import { ApiError, ReviewApi } from './api.js';

interface Call {
  url: string;
  method: string;
  body?: string;
}

function mockFetch(handler: (call: Call) => { status?: number; json?: unknown }) {
  const calls: Call[] = [];
  const fetchFn = (async (input: RequestInfo | URL, init?: RequestInit) => {
    const call: Call = {
      url: String(input),
      method: init?.method ?? 'GET',
      body: init?.body as string | undefined,
    };
    calls.push(call);
    const out = handler(call);
    const status = out.status ?? 200;
    return {
      ok: status < 400,
      status,
      json: async () => out.json ?? {},
      arrayBuffer: async () => new ArrayBuffer(0),
    } as Response;
  }) as typeof fetch;
  return { calls, fetchFn };
}

describe('ReviewApi', () => {
  it('fetches and unwraps the cluster list', async () => {
    const { fetchFn } = mockFetch(() => ({
      json: { clusters: [{ id: 0, point_count: 5, source: 'auto',
                           bbox: { center: [0, 0, 0], extents: [1, 1, 1] } }] },
    }));
    const api = new ReviewApi('', fetchFn);
    const clusters = await api.fetchClusters();
    expect(clusters).toHaveLength(1);
    expect(clusters[0].id).toBe(0);
  });

  it('serializes the add-cluster body', async () => {
    const { calls, fetchFn } = mockFetch(() => ({
      json: { status: 'ok', cluster: { id: 3, point_count: 10, source: 'manual',
                                       bbox: { center: [1, 2, 3], extents: [1, 1, 4] } } },
    }));
    const api = new ReviewApi('', fetchFn);
    const cluster = await api.addCluster({ center: [1, 2, 3], extents: [1, 1, 4] });
    expect(cluster.id).toBe(3);
    expect(calls[0].method).toBe('POST');
    expect(JSON.parse(calls[0].body!)).toEqual(
      { bbox: { center: [1, 2, 3], extents: [1, 1, 4] } });
  });

  it('surfaces the service detail message on errors', async () => {
    const { fetchFn } = mockFetch(() => ({
      status: 404, json: { detail: 'no cluster with id 9' },
    }));
    const api = new ReviewApi('', fetchFn);
    await expect(api.deleteCluster(9)).rejects.toThrowError(ApiError);
    await expect(api.deleteCluster(9)).rejects.toThrow(/no cluster with id 9/);
  });

  it('keeps mutating requests in FIFO order', async () => {
    const order: string[] = [];
    const { fetchFn } = mockFetch((call) => {
      order.push(`${call.method} ${call.url}`);
      return { json: { status: 'ok', clusters: 1 } };
    });
    const api = new ReviewApi('', fetchFn);
    await Promise.all([
      api.deleteCluster(1),
      api.addCluster({ center: [0, 0, 0], extents: [1, 1, 1] }),
      api.undo(),
      api.commit(),
    ]);
    expect(order).toEqual([
      'DELETE /api/clusters/1',
      'POST /api/clusters',
      'POST /api/undo',
      'POST /api/commit',
    ]);
  });

  it('a failed edit does not wedge the queue', async () => {
    let first = true;
    const { fetchFn } = mockFetch(() => {
      if (first) {
        first = false;
        return { status: 500, json: { detail: 'boom' } };
      }
      return { json: { status: 'ok' } };
    });
    const api = new ReviewApi('', fetchFn);
    await expect(api.deleteCluster(0)).rejects.toThrow(/boom/);
    await expect(api.undo()).resolves.toBeUndefined();
  });

  it('prefixes a base URL', async () => {
    const { calls, fetchFn } = mockFetch(() => ({ json: { clusters: [] } }));
    const api = new ReviewApi('http://127.0.0.1:9999', fetchFn);
    await api.fetchClusters();
    expect(calls[0].url).toBe('http://127.0.0.1:9999/api/clusters');
  });
});
