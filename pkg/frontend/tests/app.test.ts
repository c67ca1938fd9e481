import { describe, expect, it } from "vitest";

import type { SubjectGeometry } from "../src/api.js";
import { ApiClient } from "../src/api.js";
import { renderLogin } from "../src/app.js";
import { TrackLayer } from "../src/map.js";
import { ViewStore } from "../src/state.js";
import { mockFetch } from "./helpers.js";

class FakeContext {
  strokeStyle: unknown = "";
  fillStyle: unknown = "";
  lineWidth = 0;
  beginPath() {}
  moveTo() {}
  lineTo() {}
  stroke() {}
  arc() {}
  fill() {}
  clearRect() {}
}

function syntheticTracks(n: number): SubjectGeometry[] {
  const tracks: SubjectGeometry[] = [];
  for (let i = 0; i < n; i++) {
    const lat0 = 39.5 + (i % 50) * 0.01;
    const lon0 = -75.5 + Math.floor(i / 50) * 0.01;
    const points = Array.from({ length: 60 }, (_, j) => [
      j * 4, lat0 + j * 0.0005, lon0 + j * 0.0002, 200 + j * 5,
    ] as [number, number, number, number]);
    tracks.push({
      track_id: `T${i}`,
      points,
      annotations: [{ label: "landing", annotator: "u1", verified: true }],
      runway_id: i % 2 ? "RW-A" : "RW-B",
    });
  }
  return tracks;
}

describe("render budget", () => {
  it("draws 500 tracks within the interaction budget", () => {
    const layer = new TrackLayer();
    const ctx = new FakeContext();
    const tracks = syntheticTracks(500);
    const start = performance.now();
    layer.render(ctx, tracks, 900, 600, "label");
    const elapsed = performance.now() - start;
    expect(elapsed).toBeLessThan(1000);
  });
});

describe("app shell", () => {
  it("logs in, shows the 0-tracks indicator, and disables batch", async () => {
    const { impl } = mockFetch({
      "POST /api/auth/login": () => ({ json: { token: "tok" } }),
      "GET /api/projects/p/tracks": () => ({
        json: { ids: [], total: 0, tracks: [] },
      }),
      "GET /api/projects/p/reports/effort": () => ({
        text: "cycle,num_tracks,misclassified,annotation_effort,effort_reduction_pct\n",
      }),
      "GET /api/projects/p/models": () => ({ json: { models: [] } }),
    });
    const client = new ApiClient("http://server", impl);
    const store = new ViewStore();
    const root = document.createElement("div");
    renderLogin(root, client, store, {
      api_base_url: "http://server",
      tile_url_template: null,
    });

    const inputs = root.querySelectorAll("input");
    (inputs[0] as HTMLInputElement).value = "u1";
    (inputs[1] as HTMLInputElement).value = "pw";
    (inputs[2] as HTMLInputElement).value = "p";
    root.querySelector("form")!.dispatchEvent(
      new Event("submit", { bubbles: true, cancelable: true }),
    );
    await new Promise((resolve) => setTimeout(resolve, 20));

    expect(store.get().session?.username).toBe("u1");
    expect(root.querySelector(".count")?.textContent).toBe("0 tracks");
    const batchButton = Array.from(root.querySelectorAll("button")).find(
      (b) => b.textContent?.includes("Batch"),
    );
    expect(batchButton?.hasAttribute("disabled")).toBe(true);
  });
});
