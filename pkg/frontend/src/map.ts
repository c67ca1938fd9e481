/**
 * Canvas track layer: one polyline per subject with a start-of-track
 * marker, colored by the active mode, with altitude encoded as per-segment
 * lightness. Works offline on a blank grid; a slippy tile template can be
 * configured for a basemap.
 */

import type { SubjectGeometry } from "./api.js";
import type { ColorMode } from "./state.js";

export interface Viewport {
  minLat: number;
  minLon: number;
  maxLat: number;
  maxLon: number;
  width: number;
  height: number;
}

const PALETTE = [
  "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

/** Stable palette assignment for a category value. */
export function colorFor(value: string | null | undefined): string {
  if (!value) return "#999999";
  let hash = 0;
  for (let i = 0; i < value.length; i++) {
    hash = (hash * 31 + value.charCodeAt(i)) >>> 0;
  }
  return PALETTE[hash % PALETTE.length];
}

export function colorKey(track: SubjectGeometry, mode: ColorMode): string | null {
  if (mode === "runway") return track.runway_id ?? null;
  const current = track.annotations[track.annotations.length - 1];
  if (!current) return null;
  return mode === "label" ? current.label : current.annotator;
}

export function viewportFor(
  tracks: SubjectGeometry[],
  width: number,
  height: number,
): Viewport {
  let minLat = Infinity, minLon = Infinity, maxLat = -Infinity, maxLon = -Infinity;
  for (const track of tracks) {
    for (const [, lat, lon] of track.points) {
      if (lat < minLat) minLat = lat;
      if (lat > maxLat) maxLat = lat;
      if (lon < minLon) minLon = lon;
      if (lon > maxLon) maxLon = lon;
    }
  }
  if (!isFinite(minLat)) {
    minLat = -1; maxLat = 1; minLon = -1; maxLon = 1;
  }
  const padLat = (maxLat - minLat || 0.01) * 0.05;
  const padLon = (maxLon - minLon || 0.01) * 0.05;
  return {
    minLat: minLat - padLat, maxLat: maxLat + padLat,
    minLon: minLon - padLon, maxLon: maxLon + padLon,
    width, height,
  };
}

export function project(
  viewport: Viewport,
  lat: number,
  lon: number,
): [number, number] {
  const x = ((lon - viewport.minLon) / (viewport.maxLon - viewport.minLon)) * viewport.width;
  const y = (1 - (lat - viewport.minLat) / (viewport.maxLat - viewport.minLat)) * viewport.height;
  return [x, y];
}

/** Slippy tile URLs covering the viewport at a zoom fitting its extent. */
export function tileUrls(template: string, viewport: Viewport): string[] {
  const span = Math.max(
    viewport.maxLon - viewport.minLon,
    (viewport.maxLat - viewport.minLat) * 2,
  );
  const zoom = Math.max(1, Math.min(18, Math.floor(Math.log2(360 / span))));
  const toTile = (lat: number, lon: number) => {
    const n = 2 ** zoom;
    const x = Math.floor(((lon + 180) / 360) * n);
    const rad = (lat * Math.PI) / 180;
    const y = Math.floor(
      ((1 - Math.log(Math.tan(rad) + 1 / Math.cos(rad)) / Math.PI) / 2) * n,
    );
    return [x, Math.max(0, Math.min(n - 1, y))];
  };
  const [x0, y0] = toTile(viewport.maxLat, viewport.minLon);
  const [x1, y1] = toTile(viewport.minLat, viewport.maxLon);
  const urls: string[] = [];
  for (let x = x0; x <= x1; x++) {
    for (let y = y0; y <= y1; y++) {
      urls.push(
        template.replace("{z}", String(zoom)).replace("{x}", String(x)).replace("{y}", String(y)),
      );
    }
  }
  return urls;
}

/** The 2D-context subset the layer draws with (testable without a canvas). */
export interface DrawContext {
  strokeStyle: unknown;
  fillStyle: unknown;
  lineWidth: number;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  stroke(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  fill(): void;
  clearRect(x: number, y: number, w: number, h: number): void;
}

function altitudeRange(tracks: SubjectGeometry[]): [number, number] {
  let lo = Infinity, hi = -Infinity;
  for (const track of tracks) {
    for (const [, , , alt] of track.points) {
      if (alt < lo) lo = alt;
      if (alt > hi) hi = alt;
    }
  }
  if (!isFinite(lo) || hi <= lo) return [0, 1];
  return [lo, hi];
}

function shade(hex: string, fraction: number): string {
  // blend toward white with altitude: low = full color, high = pale
  const f = Math.max(0, Math.min(1, fraction)) * 0.6;
  const channel = (i: number) => {
    const v = parseInt(hex.slice(i, i + 2), 16);
    return Math.round(v + (255 - v) * f);
  };
  return `rgb(${channel(1)},${channel(3)},${channel(5)})`;
}

export class TrackLayer {
  viewport: Viewport | null = null;
  private drawn: Array<{ id: string; path: [number, number][] }> = [];

  render(
    ctx: DrawContext,
    tracks: SubjectGeometry[],
    width: number,
    height: number,
    mode: ColorMode,
  ): void {
    ctx.clearRect(0, 0, width, height);
    this.viewport = viewportFor(tracks, width, height);
    this.drawn = [];
    drawGrid(ctx, width, height);
    const [altLo, altHi] = altitudeRange(tracks);
    for (const track of tracks) {
      const base = colorFor(colorKey(track, mode));
      const path: [number, number][] = [];
      for (let i = 0; i < track.points.length; i++) {
        const [, lat, lon] = track.points[i];
        path.push(project(this.viewport, lat, lon));
      }
      ctx.lineWidth = 1.5;
      for (let i = 1; i < path.length; i++) {
        const alt = track.points[i][3];
        ctx.strokeStyle = shade(base, (alt - altLo) / (altHi - altLo));
        ctx.beginPath();
        ctx.moveTo(path[i - 1][0], path[i - 1][1]);
        ctx.lineTo(path[i][0], path[i][1]);
        ctx.stroke();
      }
      // start-of-track marker
      if (path.length) {
        ctx.fillStyle = "#1d4ed8";
        ctx.beginPath();
        ctx.arc(path[0][0], path[0][1], 3.5, 0, Math.PI * 2);
        ctx.fill();
      }
      this.drawn.push({ id: track.track_id, path });
    }
  }

  /** Nearest subject within tolerance of a canvas point, for hover info. */
  hitTest(x: number, y: number, tolerance = 6): string | null {
    let best: string | null = null;
    let bestDistance = tolerance;
    for (const { id, path } of this.drawn) {
      for (let i = 1; i < path.length; i++) {
        const d = pointSegmentDistance(x, y, path[i - 1], path[i]);
        if (d < bestDistance) {
          bestDistance = d;
          best = id;
        }
      }
    }
    return best;
  }
}

export function drawGrid(ctx: DrawContext, width: number, height: number): void {
  ctx.strokeStyle = "#e5e7eb";
  ctx.lineWidth = 1;
  const step = 50;
  for (let x = 0; x <= width; x += step) {
    ctx.beginPath();
    ctx.moveTo(x, 0);
    ctx.lineTo(x, height);
    ctx.stroke();
  }
  for (let y = 0; y <= height; y += step) {
    ctx.beginPath();
    ctx.moveTo(0, y);
    ctx.lineTo(width, y);
    ctx.stroke();
  }
}

function pointSegmentDistance(
  px: number,
  py: number,
  a: [number, number],
  b: [number, number],
): number {
  const dx = b[0] - a[0];
  const dy = b[1] - a[1];
  const lengthSq = dx * dx + dy * dy;
  let t = 0;
  if (lengthSq > 0) {
    t = Math.max(0, Math.min(1, ((px - a[0]) * dx + (py - a[1]) * dy) / lengthSq));
  }
  const cx = a[0] + t * dx;
  const cy = a[1] + t * dy;
  return Math.hypot(px - cx, py - cy);
}
