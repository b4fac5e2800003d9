// Minimal scripted tutorial: a sequence of canvas states over the demo
// template, each with a short explanation and an optional playground run.

import type { CanvasModel } from "./model.js";

export interface TutorialStep {
  title: string;
  text: string;
  apply: (model: CanvasModel) => void;
  runAfter: boolean;
}

function buildReferencePipeline(model: CanvasModel, snippetP: number, depthK: number): void {
  model.nodes = [];
  model.edges = [];
  model.addNode("query_generator", "single_term", 40, 80);
  model.addNode("search_backend", "mock", 220, 80);
  model.addNode("snippet_classifier", "random_attract", 400, 80);
  model.addNode("document_classifier", "always_relevant", 400, 220);
  model.addNode("stopping_strategy", "fixed_depth", 220, 220);
  model.setParam("snippet", "p", snippetP);
  model.setParam("stopping", "k", depthK);
  model.connect("query", "backend");
  model.connect("backend", "snippet");
  model.connect("snippet", "document");
  model.connect("document", "stopping");
  model.connect("stopping", "query");
}

export const TUTORIAL_STEPS: TutorialStep[] = [
  {
    title: "A pipeline has five roles",
    text:
      "A simulated searcher is wired from five components: a query generator, " +
      "a search backend, a snippet classifier, a document classifier, and a " +
      "stopping strategy. This step places all five on the canvas and connects " +
      "them in the only legal loop.",
    apply: (model) => buildReferencePipeline(model, 0.0, 3),
    runAfter: false,
  },
  {
    title: "Run the reference session",
    text:
      "With the snippet classifier's click probability at 0 and a fixed depth " +
      "of 3, the demo topic produces exactly 9 events: two queries, three " +
      "snippet examinations each, and an EXHAUSTED session end at 38 simulated " +
      "seconds. Deterministic pipelines give identical traces on every run.",
    apply: (model) => buildReferencePipeline(model, 0.0, 3),
    runAfter: true,
  },
  {
    title: "Make it click",
    text:
      "Raising the click probability to 0.5 turns the session stochastic: " +
      "clicks, judgments, and marks now depend on the bundle's master seed. " +
      "Rerunning with the same seed still reproduces the trace bit for bit.",
    apply: (model) => buildReferencePipeline(model, 0.5, 3),
    runAfter: true,
  },
  {
    title: "Patience is a parameter",
    text:
      "Changing the stopping strategy's depth from 3 to 5 makes the simulated " +
      "user examine more of each result page. Compare the measures panel with " +
      "the previous run to see the effect of one parameter.",
    apply: (model) => buildReferencePipeline(model, 0.5, 5),
    runAfter: true,
  },
];
