// Weight-scale geometry: for every frame there is a single k such that each
// ball's rendered radius is sqrt(k * energy / pi) within a pixel, no matter
// which mode populated the pans, and the physics never perturbs a radius.

import { describe, expect, it } from "vitest";
import { ApiClient } from "../src/api.js";
import { bootApp } from "../src/main.js";
import type { AppController } from "../src/main.js";
import { FakeService } from "./fakeservice.js";

const R_MAX = 44;

function expectGeometry(app: AppController): void {
  const scale = app.scale!;
  const balls = scale.balls;
  expect(balls.length).toBeGreaterThan(0);
  expect(scale.k).toBeGreaterThan(0);
  // one k per frame, derived from the heaviest ball across BOTH pans
  const maxE = Math.max(...balls.map((b) => b.mass));
  expect(scale.k).toBeCloseTo((Math.PI * R_MAX * R_MAX) / maxE, 9);
  for (const b of balls) {
    const want = Math.sqrt((scale.k * b.mass) / Math.PI);
    expect(Math.abs(b.r - want)).toBeLessThanOrEqual(1);
  }
  const biggest = Math.max(...balls.map((b) => b.r));
  expect(Math.abs(biggest - R_MAX)).toBeLessThanOrEqual(1);
}

async function advancedApp() {
  const svc = new FakeService();
  const api = new ApiClient("", svc.fetchFn);
  const root = document.createElement("div");
  document.body.append(root);
  const app = await bootApp(root, api);
  app.setPerspective("advanced");
  await app.whenIdle();
  return { svc, api, app, root };
}

describe("weight-scale geometry", () => {
  it("inspect mode: radii follow sqrt(k*energy/pi) with uniform k", async () => {
    const { app } = await advancedApp();
    expectGeometry(app);
    console.log("PASS  ball radii satisfy radius = sqrt(k*energy/pi), uniform k");
  });

  it("what-if mode: both pans share one k in the same frame", async () => {
    const { app } = await advancedApp();
    await app.runWhatif("home", [{
      op: "update_device", device_id: "washer",
      fields: { rated_power: 2.0 },
    }]);
    const scale = app.scale!;
    expect(scale.leftBalls.length).toBeGreaterThan(0);
    expect(scale.rightBalls.length).toBeGreaterThan(0);
    expectGeometry(app);
    // the boosted washer is now the heaviest ball and pins R_MAX
    const boosted = scale.rightBalls.find((b) => b.id === "washer")!;
    expect(Math.abs(boosted.r - R_MAX)).toBeLessThanOrEqual(1e-9);
  });

  it("audit mode: the metered ball obeys the same k as the device balls", async () => {
    const { app } = await advancedApp();
    await app.runAudit("home");
    const scale = app.scale!;
    expect(scale.leftBalls.length).toBe(1);
    expect(scale.leftBalls[0].id).toBe("__measured__");
    expectGeometry(app);
  });

  it("settling the physics leaves every radius bit-identical", async () => {
    const { app } = await advancedApp();
    const scale = app.scale!;
    const before = scale.balls.map((b) => b.r);
    scale.settle();
    expect(scale.balls.map((b) => b.r)).toEqual(before);
    expectGeometry(app);
  });

  it("zero-rated devices put no ball on the scale", async () => {
    const { api, app } = await advancedApp();
    await api.patchProfile("home", [{
      op: "update_device", device_id: "washer",
      fields: { rated_power: 0 },
    }]);
    await app.inspectProfile("home");
    expect(app.scale!.balls.some((b) => b.id === "washer")).toBe(false);
    expectGeometry(app);
  });

  it("editing a device re-evaluates and resizes the frame", async () => {
    const { app } = await advancedApp();
    const before = app.scale!.k;
    await api_patch_and_wait(app);
    expect(app.scale!.k).not.toBe(before);
    expectGeometry(app);
  });
});

/** Drive the editor's apply button the way a user would. */
async function api_patch_and_wait(app: AppController): Promise<void> {
  const editor = app.scale!.root.querySelector(".device-editor")!;
  const row = editor.querySelector(".editor-row")!;
  const power = row.querySelector<HTMLInputElement>(".power-input")!;
  power.value = "4.0";
  row.querySelector<HTMLButtonElement>(".apply-btn")!.click();
  await new Promise((r) => setTimeout(r, 0));
  await app.whenIdle();
}
