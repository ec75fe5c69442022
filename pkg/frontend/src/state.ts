/**
 * Pure session-state transitions. The UI applies these optimistically and
 * rolls back by re-fetching when a request fails, so every function here
 * must be side-effect free.
 */

import { ClusterInfo } from './types.js';

export interface SessionState {
  clusters: ClusterInfo[];
  selectedId: number | null;
  /** Edits applied since the last commit; the dirty flag is derived. */
  pendingEdits: number;
}

export function initialState(): SessionState {
  return { clusters: [], selectedId: null, pendingEdits: 0 };
}

export function setClusters(state: SessionState,
                            clusters: ClusterInfo[]): SessionState {
  const selectedId = clusters.some((c) => c.id === state.selectedId)
    ? state.selectedId : null;
  return { ...state, clusters: [...clusters], selectedId };
}

export function selectCluster(state: SessionState,
                              id: number | null): SessionState {
  if (id !== null && !state.clusters.some((c) => c.id === id)) {
    return state;
  }
  return { ...state, selectedId: id };
}

export function removeCluster(state: SessionState, id: number): SessionState {
  const clusters = state.clusters.filter((c) => c.id !== id);
  if (clusters.length === state.clusters.length) {
    return state;
  }
  return {
    clusters,
    selectedId: state.selectedId === id ? null : state.selectedId,
    pendingEdits: state.pendingEdits + 1,
  };
}

export function addCluster(state: SessionState,
                           info: ClusterInfo): SessionState {
  return {
    ...state,
    clusters: [...state.clusters, info],
    pendingEdits: state.pendingEdits + 1,
  };
}

export function noteUndo(state: SessionState): SessionState {
  return { ...state, pendingEdits: Math.max(0, state.pendingEdits - 1) };
}

export function markCommitted(state: SessionState): SessionState {
  return { ...state, pendingEdits: 0 };
}

export function isDirty(state: SessionState): boolean {
  return state.pendingEdits > 0;
}
