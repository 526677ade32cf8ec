/** Pure pan/zoom tile math for the pyramid viewer. */

import type { LevelMeta } from "./api.js";

export const TILE_SIZE = 256;

export interface Viewport {
  width: number;
  height: number;
}

export interface ViewState {
  center: [number, number]; // world (level-0) coords at the viewport center
  zoom: number; // display px per world px
}

export interface TilePlacement {
  level: number;
  row: number;
  col: number;
  x: number; // destination rect on screen
  y: number;
  w: number;
  h: number;
}

/** Coarsest level whose pixels are not stretched beyond ~1 display px. */
export function levelForZoom(zoom: number, nLevels: number): number {
  const k = Math.floor(-Math.log2(Math.max(zoom, 1e-9)));
  return Math.min(Math.max(k, 0), nLevels - 1);
}

export function worldToScreen(view: ViewState, vp: Viewport, r: number, c: number): [number, number] {
  return [
    (c - view.center[1]) * view.zoom + vp.width / 2,
    (r - view.center[0]) * view.zoom + vp.height / 2,
  ];
}

export function screenToWorld(view: ViewState, vp: Viewport, x: number, y: number): [number, number] {
  return [
    (y - vp.height / 2) / view.zoom + view.center[0],
    (x - vp.width / 2) / view.zoom + view.center[1],
  ];
}

export function visibleTiles(view: ViewState, vp: Viewport, levels: LevelMeta[]): TilePlacement[] {
  if (!levels.length) return [];
  const level = levelForZoom(view.zoom, levels.length);
  const meta = levels[level];
  const scale = 2 ** level; // world px per level px
  const [r0w, c0w] = screenToWorld(view, vp, 0, 0);
  const [r1w, c1w] = screenToWorld(view, vp, vp.width, vp.height);
  const out: TilePlacement[] = [];
  const rowLo = Math.max(0, Math.floor(r0w / scale / TILE_SIZE));
  const rowHi = Math.min(Math.ceil(meta.height / TILE_SIZE) - 1, Math.floor(r1w / scale / TILE_SIZE));
  const colLo = Math.max(0, Math.floor(c0w / scale / TILE_SIZE));
  const colHi = Math.min(Math.ceil(meta.width / TILE_SIZE) - 1, Math.floor(c1w / scale / TILE_SIZE));
  for (let row = rowLo; row <= rowHi; row++) {
    for (let col = colLo; col <= colHi; col++) {
      const tileH = Math.min(TILE_SIZE, meta.height - row * TILE_SIZE);
      const tileW = Math.min(TILE_SIZE, meta.width - col * TILE_SIZE);
      const [x, y] = worldToScreen(view, vp, row * TILE_SIZE * scale, col * TILE_SIZE * scale);
      out.push({
        level,
        row,
        col,
        x,
        y,
        w: tileW * scale * view.zoom,
        h: tileH * scale * view.zoom,
      });
    }
  }
  return out;
}

/** Snap a world coordinate to a valid patch center for hr_level=0. */
export function snapCenter(
  r: number,
  c: number,
  patchSize: number,
  level0: { height: number; width: number },
): [number, number] {
  const half = patchSize; // LR window half-extent in world px at hr_level 0
  const clamp = (v: number, hi: number) => Math.min(Math.max(v, half), hi - half);
  const snap = (v: number) => 2 * Math.round(v / 2);
  return [snap(clamp(r, level0.height)), snap(clamp(c, level0.width))];
}
