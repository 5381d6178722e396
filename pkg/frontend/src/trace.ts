// Canvas renderer for movement traces: dark-to-light circles over a
// mid-gray field, connectors between same-timestamp blobs - the same
// visual encoding as the archived trace images, scaled up for reading.

import type { TraceModel } from "./model.js";

const FIELD_GRAY = 180;

export function drawTrace(canvas: HTMLCanvasElement, model: TraceModel,
                          frameWidth: number, frameHeight: number,
                          scale = 8): void {
  canvas.width = frameWidth * scale;
  canvas.height = frameHeight * scale;
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.fillStyle = `rgb(${FIELD_GRAY},${FIELD_GRAY},${FIELD_GRAY})`;
  ctx.fillRect(0, 0, canvas.width, canvas.height);

  const gray = (v: number) => `rgb(${v},${v},${v})`;

  for (const seg of model.segments) {
    ctx.strokeStyle = gray(seg.intensity);
    ctx.lineWidth = Math.max(1, scale / 4);
    ctx.beginPath();
    ctx.moveTo(seg.x0 * scale, seg.y0 * scale);
    ctx.lineTo(seg.x1 * scale, seg.y1 * scale);
    ctx.stroke();
  }
  for (const c of model.circles) {
    ctx.fillStyle = gray(c.intensity);
    ctx.beginPath();
    ctx.arc(c.x * scale, c.y * scale, c.r * scale, 0, 2 * Math.PI);
    ctx.fill();
  }
}
