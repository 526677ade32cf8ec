/** Browser entry point: DOM wiring for the annotator. */

import { createController } from "./renderer.js";
import { screenToWorld } from "./viewer.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function main(): void {
  const mainCanvas = el<HTMLCanvasElement>("viewer");
  const hrPane = el<HTMLCanvasElement>("hr-pane");
  const lrPane = el<HTMLCanvasElement>("lr-pane");
  const banner = el<HTMLDivElement>("banner");
  const status = el<HTMLDivElement>("status");
  const controller = createController("", mainCanvas, hrPane, lrPane, banner, status);

  const vp = () => ({ width: mainCanvas.width, height: mainCanvas.height });
  const view = () => ({ center: controller.state.center, zoom: controller.state.zoom });

  let dragStart: [number, number] | null = null;
  let boxMode = false;
  let panning = false;

  el<HTMLButtonElement>("new-session").addEventListener("click", () => {
    const seed = Number((el<HTMLInputElement>("seed")).value || "0");
    void controller.createSession({ n_objects: 2, seed, image_size: 256, n_levels: 3 });
  });
  el<HTMLButtonElement>("undo").addEventListener("click", () => controller.undo());
  el<HTMLButtonElement>("reset").addEventListener("click", () => controller.reset());
  const boxToggle = el<HTMLButtonElement>("box-mode");
  boxToggle.addEventListener("click", () => {
    boxMode = !boxMode;
    boxToggle.classList.toggle("active", boxMode);
  });
  banner.addEventListener("click", () => controller.dispatch({ type: "dismiss_error" }));

  mainCanvas.addEventListener("contextmenu", (e) => e.preventDefault());
  mainCanvas.addEventListener("mousedown", (e) => {
    const [r, c] = screenToWorld(view(), vp(), e.offsetX, e.offsetY);
    if (e.button === 1 || e.shiftKey) {
      panning = true;
      dragStart = [r, c];
    } else if (boxMode && e.button === 0) {
      dragStart = [r, c];
    }
  });
  mainCanvas.addEventListener("mousemove", (e) => {
    if (panning && dragStart) {
      const [r, c] = screenToWorld(view(), vp(), e.offsetX, e.offsetY);
      const [cr, cc] = controller.state.center;
      controller.dispatch({ type: "pan", center: [cr - (r - cr) + (dragStart[0] - cr), cc - (c - cc) + (dragStart[1] - cc)] });
    }
  });
  mainCanvas.addEventListener("mouseup", (e) => {
    const [r, c] = screenToWorld(view(), vp(), e.offsetX, e.offsetY);
    if (panning) {
      panning = false;
      dragStart = null;
      return;
    }
    if (boxMode && dragStart) {
      controller.dragBox(dragStart[0], dragStart[1], r, c);
      dragStart = null;
      return;
    }
    if (e.button === 0) controller.clickPoint(r, c, 1);
    if (e.button === 2) controller.clickPoint(r, c, 0);
  });
  mainCanvas.addEventListener("wheel", (e) => {
    e.preventDefault();
    const factor = e.deltaY < 0 ? 1.25 : 0.8;
    const zoom = Math.min(Math.max(controller.state.zoom * factor, 0.25), 8);
    controller.dispatch({ type: "zoom", zoom });
  });
}

main();
