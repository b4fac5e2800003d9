import { describe, expect, it } from "vitest";

import { CanvasModel } from "../src/model.js";
import { TUTORIAL_STEPS } from "../src/tutorial.js";
import { makeCatalog } from "./helpers.js";

describe("tutorial steps", () => {
  it("every step leaves the canvas complete and connected", () => {
    const model = new CanvasModel(makeCatalog());
    for (const step of TUTORIAL_STEPS) {
      step.apply(model);
      expect(model.badges(), step.title).toEqual([]);
      const pipeline = model.serialize();
      expect(pipeline.nodes).toHaveLength(5);
      expect(pipeline.edges).toHaveLength(5);
    }
  });

  it("moves from the deterministic to a stochastic configuration", () => {
    const model = new CanvasModel(makeCatalog());
    TUTORIAL_STEPS[0].apply(model);
    expect(model.node("snippet")!.params["p"]).toBe(0.0);
    TUTORIAL_STEPS[2].apply(model);
    expect(model.node("snippet")!.params["p"]).toBe(0.5);
    TUTORIAL_STEPS[3].apply(model);
    expect(model.node("stopping")!.params["k"]).toBe(5);
  });

  it("marks which steps trigger a playground run", () => {
    expect(TUTORIAL_STEPS.map((s) => s.runAfter)).toEqual([false, true, true, true]);
  });
});
