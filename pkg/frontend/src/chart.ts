// Canvas renderer for the performance chart model.

import type { ChartModel } from "./model.js";

export function drawChart(canvas: HTMLCanvasElement, model: ChartModel): void {
  canvas.width = model.width;
  canvas.height = model.height;
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, model.width, model.height);
  ctx.font = "11px sans-serif";

  const { plot } = model;

  // frame + y grid
  ctx.strokeStyle = "#ccc";
  ctx.fillStyle = "#555";
  for (const tick of model.yTicks) {
    ctx.beginPath();
    ctx.moveTo(plot.x0, tick.y);
    ctx.lineTo(plot.x1, tick.y);
    ctx.stroke();
    ctx.textAlign = "right";
    ctx.textBaseline = "middle";
    ctx.fillText(tick.label, plot.x0 - 6, tick.y);
  }
  ctx.textAlign = "center";
  ctx.textBaseline = "top";
  for (const tick of model.xTicks) {
    ctx.fillText(tick.label, tick.x, plot.y1 + 8);
  }

  // chance line at 1/3
  ctx.save();
  ctx.strokeStyle = "#b36b00";
  ctx.setLineDash([6, 4]);
  ctx.beginPath();
  ctx.moveTo(plot.x0, model.chanceY);
  ctx.lineTo(plot.x1, model.chanceY);
  ctx.stroke();
  ctx.restore();
  ctx.fillStyle = "#b36b00";
  ctx.textAlign = "left";
  ctx.textBaseline = "bottom";
  ctx.fillText("chance 33.3%", plot.x0 + 4, model.chanceY - 2);

  for (const series of model.series) {
    ctx.strokeStyle = series.color;
    ctx.fillStyle = series.color;
    ctx.lineWidth = series.key === "overall" ? 2 : 1;
    ctx.beginPath();
    series.points.forEach((pt, i) => {
      if (i === 0) ctx.moveTo(pt.x, pt.y);
      else ctx.lineTo(pt.x, pt.y);
    });
    ctx.stroke();
    for (const pt of series.points) {
      ctx.beginPath();
      ctx.arc(pt.x, pt.y, series.key === "overall" ? 3.5 : 2.5, 0, 2 * Math.PI);
      ctx.fill();
      if (pt.marker) {
        // significance star above the point
        ctx.textAlign = "center";
        ctx.textBaseline = "bottom";
        ctx.font = "bold 12px sans-serif";
        ctx.fillText("*", pt.x, pt.y - 4);
        ctx.font = "11px sans-serif";
      }
    }
  }

  // legend
  let lx = plot.x0 + 8;
  const ly = plot.y0 + 4;
  ctx.textAlign = "left";
  ctx.textBaseline = "middle";
  for (const series of model.series) {
    ctx.fillStyle = series.color;
    ctx.fillRect(lx, ly - 3, 14, 3);
    lx += 18;
    ctx.fillText(series.label, lx, ly);
    lx += ctx.measureText(series.label).width + 14;
  }
}
