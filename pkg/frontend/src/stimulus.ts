/**
 * Deterministic stimulus scenes. Everything derives from the server's
 * render seed: the first PRNG draw fixes the target count (identically
 * to the server's hidden truth), subsequent draws lay out the shapes.
 */

import { mulberry32 } from "./prng.js";
import type { Stimulus } from "./api.js";

export interface ShapeInstance {
  kind: string;
  x: number;
  y: number;
  size: number;
  rotation: number;
  color: string;
}

export interface Scene {
  targetShape: string;
  targetCount: number;
  width: number;
  height: number;
  shapes: ShapeInstance[];
}

const DISTRACTOR_MAX = 12;
const PALETTE = ["#e4572e", "#17bebb", "#ffc914", "#2e282a", "#76b041", "#8338ec"];
const MIN_SIZE = 10;
const MAX_SIZE = 22;

export function generateScene(stim: Stimulus, width = 480, height = 360): Scene {
  const rand = mulberry32(stim.render_seed);
  const [lo, hi] = stim.count_range;
  const targetCount = lo + Math.floor(rand() * (hi - lo + 1));

  const kinds: string[] = [];
  for (let i = 0; i < targetCount; i++) kinds.push(stim.shape_type);
  for (const kind of stim.shape_types) {
    if (kind === stim.shape_type) continue;
    const n = Math.floor(rand() * (DISTRACTOR_MAX + 1));
    for (let i = 0; i < n; i++) kinds.push(kind);
  }

  const shapes: ShapeInstance[] = kinds.map((kind) => {
    const size = MIN_SIZE + rand() * (MAX_SIZE - MIN_SIZE);
    return {
      kind,
      x: size + rand() * (width - 2 * size),
      y: size + rand() * (height - 2 * size),
      size,
      rotation: rand() * 2 * Math.PI,
      color: PALETTE[Math.floor(rand() * PALETTE.length)],
    };
  });

  // Interleave positions deterministically so distractors are not layered
  // on top of targets in z-order.
  for (let i = shapes.length - 1; i > 0; i--) {
    const j = Math.floor(rand() * (i + 1));
    [shapes[i], shapes[j]] = [shapes[j], shapes[i]];
  }

  return { targetShape: stim.shape_type, targetCount, width, height, shapes };
}

/** Minimal 2D surface so rendering stays testable without a DOM. */
export interface Draw2D {
  fillStyle: string | CanvasGradient | CanvasPattern;
  clearRect(x: number, y: number, w: number, h: number): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  closePath(): void;
  fill(): void;
  save(): void;
  restore(): void;
  translate(x: number, y: number): void;
  rotate(angle: number): void;
}

function drawPolygon(ctx: Draw2D, points: Array<[number, number]>): void {
  ctx.beginPath();
  points.forEach(([x, y], i) => (i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y)));
  ctx.closePath();
  ctx.fill();
}

function drawShape(ctx: Draw2D, shape: ShapeInstance): void {
  ctx.save();
  ctx.translate(shape.x, shape.y);
  ctx.rotate(shape.rotation);
  ctx.fillStyle = shape.color;
  const r = shape.size;
  if (shape.kind === "square") {
    ctx.fillRect(-r / 2, -r / 2, r, r);
  } else if (shape.kind === "star") {
    const points: Array<[number, number]> = [];
    for (let i = 0; i < 10; i++) {
      const radius = i % 2 === 0 ? r : r * 0.45;
      const angle = (i * Math.PI) / 5 - Math.PI / 2;
      points.push([Math.cos(angle) * radius, Math.sin(angle) * radius]);
    }
    drawPolygon(ctx, points);
  } else {
    // triangle is the default shape
    drawPolygon(ctx, [
      [0, -r],
      [r * 0.87, r * 0.5],
      [-r * 0.87, r * 0.5],
    ]);
  }
  ctx.restore();
}

export function renderScene(ctx: Draw2D, scene: Scene): void {
  ctx.fillStyle = "#f7f5f0";
  ctx.clearRect(0, 0, scene.width, scene.height);
  ctx.fillRect(0, 0, scene.width, scene.height);
  for (const shape of scene.shapes) {
    drawShape(ctx, shape);
  }
}
