import { ApiError, ReviewApi } from './api.js';
import { clusterColor, cssColor } from './colors.js';
import {
  SessionState, addCluster, initialState, isDirty, markCommitted, noteUndo,
  removeCluster, selectCluster, setClusters,
} from './state.js';
import { ClusterInfo } from './types.js';
import { CloudViewer } from './viewer.js';

const api = new ReviewApi();
let state: SessionState = initialState();

const el = {
  viewer: document.getElementById('viewer') as HTMLElement,
  list: document.getElementById('cluster-list') as HTMLElement,
  addButton: document.getElementById('btn-add') as HTMLButtonElement,
  undoButton: document.getElementById('btn-undo') as HTMLButtonElement,
  commitButton: document.getElementById('btn-commit') as HTMLButtonElement,
  status: document.getElementById('status') as HTMLElement,
  banner: document.getElementById('banner') as HTMLElement,
};

const viewer = new CloudViewer(el.viewer, {
  onSelect: (id) => {
    state = selectCluster(state, id);
    refresh();
  },
  onBoxDrawn: (bbox) => {
    setAddMode(false);
    api.addCluster(bbox)
      .then((cluster) => {
        state = addCluster(state, cluster);
        refresh();
        toast(`added manual cluster ${cluster.id} `
              + `(${cluster.point_count} points)`);
      })
      .catch((err) => showError(err, 'adding a cluster'));
  },
});

function refresh(): void {
  viewer.setClusters(state.clusters);
  viewer.setSelected(state.selectedId);
  renderList();
  el.status.textContent = isDirty(state)
    ? `${state.pendingEdits} uncommitted edit(s)` : 'no uncommitted edits';
  el.undoButton.disabled = !isDirty(state);
}

function renderList(): void {
  el.list.replaceChildren();
  for (const cluster of state.clusters) {
    el.list.appendChild(clusterRow(cluster));
  }
  if (!state.clusters.length) {
    const empty = document.createElement('div');
    empty.className = 'empty';
    empty.textContent = 'no clusters';
    el.list.appendChild(empty);
  }
}

function clusterRow(cluster: ClusterInfo): HTMLElement {
  const row = document.createElement('div');
  row.className = 'row' + (cluster.id === state.selectedId ? ' selected' : '');
  row.addEventListener('click', () => {
    state = selectCluster(state,
      state.selectedId === cluster.id ? null : cluster.id);
    refresh();
  });

  const chip = document.createElement('span');
  chip.className = 'chip';
  chip.style.background = cssColor(clusterColor(cluster.id));
  const label = document.createElement('span');
  label.className = 'label';
  label.textContent = `#${cluster.id} · ${cluster.point_count} pts`;
  const badge = document.createElement('span');
  badge.className = `badge ${cluster.source}`;
  badge.textContent = cluster.source;
  const del = document.createElement('button');
  del.textContent = '✕';
  del.title = 'delete cluster';
  del.addEventListener('click', (event) => {
    event.stopPropagation();
    deleteCluster(cluster.id);
  });

  row.append(chip, label, badge, del);
  return row;
}

function deleteCluster(id: number): void {
  const before = state;
  state = removeCluster(state, id);
  refresh();
  api.deleteCluster(id).catch((err) => {
    state = before; // roll the optimistic update back
    refresh();
    showError(err, `deleting cluster ${id}`);
  });
}

function undo(): void {
  api.undo()
    .then(() => reloadClusters())
    .then(() => {
      state = noteUndo(state);
      refresh();
      toast('undid last edit');
    })
    .catch((err) => showError(err, 'undo'));
}

function commit(): void {
  api.commit()
    .then((count) => {
      state = markCommitted(state);
      refresh();
      toast(`committed ${count} clusters`);
    })
    .catch((err) => showError(err, 'commit'));
}

async function reloadClusters(): Promise<void> {
  state = setClusters(state, await api.fetchClusters());
  refresh();
}

function setAddMode(on: boolean): void {
  viewer.setDrawMode(on);
  el.addButton.classList.toggle('active', on);
  el.addButton.textContent = on ? 'drag a box… (esc)' : 'add box';
}

function toast(message: string): void {
  el.banner.textContent = message;
  el.banner.className = 'ok';
  window.setTimeout(() => {
    if (el.banner.className === 'ok') el.banner.className = 'hidden';
  }, 2500);
}

function showError(err: unknown, doing: string): void {
  const message = err instanceof ApiError
    ? `${doing}: ${err.message}` : `${doing} failed: service unreachable`;
  el.banner.textContent = message;
  el.banner.className = 'error';
}

async function load(): Promise<void> {
  el.banner.className = 'hidden';
  el.status.textContent = 'loading…';
  try {
    const [clusters, positions] = await Promise.all([
      api.fetchClusters(), api.fetchCloud(),
    ]);
    state = setClusters(state, clusters);
    viewer.setCloud(positions);
    refresh();
    toast(`loaded ${positions.length / 3} points, `
          + `${clusters.length} clusters`);
  } catch (err) {
    showError(err, 'loading session');
    const retry = document.createElement('button');
    retry.textContent = 'retry';
    retry.addEventListener('click', () => void load());
    el.banner.append(' ', retry);
  }
}

el.addButton.addEventListener('click', () => setAddMode(!viewer.isDrawMode));
el.undoButton.addEventListener('click', undo);
el.commitButton.addEventListener('click', commit);

window.addEventListener('keydown', (event) => {
  if (event.key === 'Escape') setAddMode(false);
  if (event.key === 'Delete' && state.selectedId !== null) {
    deleteCluster(state.selectedId);
  }
});

window.addEventListener('beforeunload', (event) => {
  if (isDirty(state)) event.preventDefault();
});

void load();
