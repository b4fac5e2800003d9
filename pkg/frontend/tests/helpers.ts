// Shared fixtures: a catalog equivalent to the server's builtin catalog
// and the 9-event reference trace emitted by the demo pipeline.

import type { Catalog } from "../src/types.js";
import { CanvasModel } from "../src/model.js";

export function makeCatalog(): Catalog {
  const prob = (name: string) => ({
    name,
    kind: "float" as const,
    default: 0.5,
    min: 0,
    max: 1,
    required: false,
  });
  return {
    components: [
      { role: "query_generator", name: "single_term", schema: [] },
      { role: "query_generator", name: "title_pairs", schema: [] },
      { role: "search_backend", name: "mock", schema: [] },
      {
        role: "search_backend",
        name: "bm25",
        schema: [
          { name: "k1", kind: "float", default: 1.2, min: 0, required: false },
          { name: "b", kind: "float", default: 0.75, min: 0, max: 1, required: false },
          { name: "serp_depth", kind: "int", default: 10, min: 1, required: false },
        ],
      },
      { role: "snippet_classifier", name: "random_attract", schema: [prob("p")] },
      { role: "snippet_classifier", name: "rank_biased", schema: [prob("gamma")] },
      { role: "document_classifier", name: "always_relevant", schema: [] },
      {
        role: "stopping_strategy",
        name: "fixed_depth",
        schema: [{ name: "k", kind: "int", default: 3, min: 1, required: false }],
      },
    ],
    adjacency: [
      ["document_classifier", "stopping_strategy"],
      ["query_generator", "search_backend"],
      ["search_backend", "snippet_classifier"],
      ["snippet_classifier", "document_classifier"],
      ["stopping_strategy", "query_generator"],
    ],
  };
}

export function composeReference(model: CanvasModel): void {
  model.addNode("query_generator", "single_term");
  model.addNode("search_backend", "mock");
  model.addNode("snippet_classifier", "random_attract");
  model.addNode("document_classifier", "always_relevant");
  model.addNode("stopping_strategy", "fixed_depth");
  model.setParam("snippet", "p", 0.0);
  model.setParam("stopping", "k", 3);
  model.connect("query", "backend");
  model.connect("backend", "snippet");
  model.connect("snippet", "document");
  model.connect("document", "stopping");
  model.connect("stopping", "query");
}

// Verbatim output of the deterministic demo pipeline (user 0, topic t1).
export const REFERENCE_TRACE = [
  '{"action":"QUERY_ISSUED","payload":{"query":"coral"},"seq":1,"sim_time":10.0,"topic_id":"t1","user":0}',
  '{"action":"SNIPPET_EXAMINED","payload":{"doc_id":"m1","rank":1},"seq":2,"sim_time":13.0,"topic_id":"t1","user":0}',
  '{"action":"SNIPPET_EXAMINED","payload":{"doc_id":"m2","rank":2},"seq":3,"sim_time":16.0,"topic_id":"t1","user":0}',
  '{"action":"SNIPPET_EXAMINED","payload":{"doc_id":"m3","rank":3},"seq":4,"sim_time":19.0,"topic_id":"t1","user":0}',
  '{"action":"QUERY_ISSUED","payload":{"query":"reef"},"seq":5,"sim_time":29.0,"topic_id":"t1","user":0}',
  '{"action":"SNIPPET_EXAMINED","payload":{"doc_id":"m1","rank":1},"seq":6,"sim_time":32.0,"topic_id":"t1","user":0}',
  '{"action":"SNIPPET_EXAMINED","payload":{"doc_id":"m2","rank":2},"seq":7,"sim_time":35.0,"topic_id":"t1","user":0}',
  '{"action":"SNIPPET_EXAMINED","payload":{"doc_id":"m3","rank":3},"seq":8,"sim_time":38.0,"topic_id":"t1","user":0}',
  '{"action":"SESSION_END","payload":{"reason":"EXHAUSTED"},"seq":9,"sim_time":38.0,"topic_id":"t1","user":0}',
].join("\n") + "\n";
