// App shell: tabs, settings, and the wiring between the canvas model, the
// API client, and the render functions. All validation shown here either
// came from a server response or from the server-published catalog.

import { ApiClient, ApiError } from "./api.js";
import { renderBadges, renderCanvas, renderPalette, renderParamPanel } from "./composer.js";
import { DEFAULT_COMPONENT_CODE, EditorController, type EditorState } from "./editor.js";
import { CanvasModel } from "./model.js";
import { renderLogPane, renderRunControls, renderStatusChip } from "./playground.js";
import { RunPoller } from "./polling.js";
import { parseTraceLines, renderMeasures, renderTraceTable, traceRows, escapeHtml } from "./trace.js";
import { renderTemplateDetail, renderTemplateList } from "./templates_view.js";
import { TUTORIAL_STEPS } from "./tutorial.js";
import type { Role, TemplateValue } from "./types.js";

interface AppState {
  client: ApiClient;
  model: CanvasModel | null;
  selectedNode: string | null;
  paramErrors: Record<string, string>;
  pendingFrom: string | null;
  notice: string;
  template: { name: string; version: number; engineVersion: string } | null;
  selectedTemplate: TemplateValue | null;
  poller: RunPoller | null;
  lastRecord: import("./types.js").RunRecordValue | null;
  traceHtml: string;
  measuresHtml: string;
  bundleHash: string;
  running: boolean;
  tutorialStep: number;
  editor: EditorController;
  editorState: EditorState;
  editorFindings: string;
  editorHistory: string;
}

const state: AppState = {
  client: new ApiClient(localStorage.getItem("simdesk.base") ?? "", localStorage.getItem("simdesk.token") ?? ""),
  model: null,
  selectedNode: null,
  paramErrors: {},
  pendingFrom: null,
  notice: "",
  template: null,
  selectedTemplate: null,
  poller: null,
  lastRecord: null,
  traceHtml: "",
  measuresHtml: "",
  bundleHash: "",
  running: false,
  tutorialStep: -1,
  editor: null as unknown as EditorController,
  editorState: {
    namespace: "me",
    name: "my_stopper",
    category: "stopping_strategy",
    entrypoint: ["python3", "main.py"],
    code: DEFAULT_COMPONENT_CODE,
    codeFile: "main.py",
    schemaText: "",
    external: false,
  },
  editorFindings: "",
  editorHistory: "",
};

function $(selector: string): HTMLElement {
  const el = document.querySelector(selector);
  if (!el) throw new Error(`missing element ${selector}`);
  return el as HTMLElement;
}

function setNotice(text: string, isError = false): void {
  state.notice = text;
  const el = $("#notice");
  el.textContent = text;
  el.className = isError ? "notice error" : "notice";
}

function apiErrorText(error: unknown): string {
  if (error instanceof ApiError) {
    const field = error.offendingField ? ` (field: ${error.offendingField})` : "";
    return `${error.code}: ${error.value.detail}${field}`;
  }
  return String(error);
}

// ---- composer -----------------------------------------------------------

function redrawComposer(): void {
  if (!state.model) return;
  $("#palette").innerHTML = renderPalette(state.model);
  $("#badges").innerHTML = renderBadges(state.model);
  $("#canvas-holder").innerHTML = renderCanvas(state.model, state.selectedNode);
  $("#param-panel").innerHTML = renderParamPanel(state.model, state.selectedNode, state.paramErrors);
  const info = state.template
    ? `template (${state.template.name}, v${state.template.version}), engine ${state.template.engineVersion}`
    : "no template selected";
  $("#template-info").textContent = info;
}

function handleCanvasClick(nodeId: string): void {
  if (!state.model) return;
  if (state.pendingFrom === null) {
    state.selectedNode = nodeId;
    state.paramErrors = {};
    redrawComposer();
    return;
  }
  const result = state.model.connect(state.pendingFrom, nodeId);
  state.pendingFrom = null;
  $("#connect-button").classList.remove("armed");
  if ("code" in result) {
    setNotice(`${result.code}: ${result.hint}`, true);
  } else {
    setNotice(`edge ${result.from} -> ${result.to} added`);
  }
  redrawComposer();
}

function bindComposerEvents(): void {
  $("#composer").addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    const addRole = target.getAttribute("data-add-role");
    if (addRole && state.model) {
      const select = document.querySelector(
        `select[data-palette-role="${addRole}"]`,
      ) as HTMLSelectElement | null;
      const name = select?.value;
      if (name) {
        const placed = state.model.nodes.length;
        const result = state.model.addNode(addRole as Role, name, 40 + (placed % 3) * 240, 50 + Math.floor(placed / 3) * 140);
        if ("code" in result && "hint" in result) {
          setNotice(result.hint, true);
        }
        redrawComposer();
      }
      return;
    }
    const nodeEl = target.closest("[data-node]");
    if (nodeEl) {
      handleCanvasClick(nodeEl.getAttribute("data-node")!);
      return;
    }
    const removeId = target.getAttribute("data-remove-node");
    if (removeId && state.model) {
      state.model.removeNode(removeId);
      state.selectedNode = null;
      redrawComposer();
    }
  });

  $("#connect-button").addEventListener("click", () => {
    if (!state.selectedNode) {
      setNotice("select the edge's source node first", true);
      return;
    }
    state.pendingFrom = state.selectedNode;
    $("#connect-button").classList.add("armed");
    setNotice(`click a target node to connect from ${state.pendingFrom}`);
  });

  $("#param-panel").addEventListener("change", (event) => {
    const target = event.target as HTMLInputElement | HTMLSelectElement;
    if (!state.model || !state.selectedNode) return;
    if (target.hasAttribute("data-component-select")) {
      state.model.setComponent(state.selectedNode, target.value);
      state.paramErrors = {};
      redrawComposer();
      return;
    }
    const param = target.getAttribute("data-param");
    if (!param) return;
    const node = state.model.node(state.selectedNode);
    const schema = node ? state.model.schemaFor(node.role, node.componentName) ?? [] : [];
    const entry = schema.find((e) => e.name === param);
    let value: unknown = target.value;
    if (target instanceof HTMLInputElement && target.type === "checkbox") {
      value = target.checked;
    } else if (entry && (entry.kind === "int" || entry.kind === "float")) {
      value = entry.kind === "int" ? parseInt(target.value, 10) : parseFloat(target.value);
    }
    const problem = state.model.setParam(state.selectedNode, param, value);
    state.paramErrors = problem ? { [param]: `PARAM_INVALID: ${problem}` } : {};
    redrawComposer();
  });
}

// ---- playground -----------------------------------------------------------

async function composeBundle(): Promise<import("./types.js").BundleValue | null> {
  if (!state.model || !state.template) {
    setNotice("compose a pipeline and pick a template first", true);
    return null;
  }
  const badges = state.model.badges();
  if (badges.length > 0) {
    setNotice(`cannot export: ${badges.join("; ")}`, true);
    return null;
  }
  const seed = parseInt(($("#seed-input") as HTMLInputElement).value, 10) || 0;
  const reps = parseInt(($("#reps-input") as HTMLInputElement).value, 10) || 1;
  return state.model.buildBundle({
    engineVersion: state.template.engineVersion,
    templateName: state.template.name,
    templateVersion: state.template.version,
    masterSeed: seed,
    repetitions: reps,
    author: "workbench",
  });
}

async function submitBundle(): Promise<string | null> {
  const bundle = await composeBundle();
  if (!bundle) return null;
  try {
    const { bundle_hash } = await state.client.postBundle(bundle);
    state.bundleHash = bundle_hash;
    $("#bundle-hash").textContent = bundle_hash;
    return bundle_hash;
  } catch (error) {
    setNotice(apiErrorText(error), true);
    return null;
  }
}

async function runInPlayground(): Promise<void> {
  const hash = await submitBundle();
  if (!hash) return;
  state.running = true;
  state.traceHtml = "";
  state.measuresHtml = "";
  redrawPlayground();
  try {
    const { run_id } = await state.client.submitRun(hash);
    state.poller = new RunPoller(state.client, run_id);
    const record = await state.poller.waitForCompletion(200, 120_000);
    state.lastRecord = record;
    if (record.status === "COMPLETED") {
      const traceText = await state.client.getTraceText(run_id, 0);
      state.traceHtml = renderTraceTable(traceRows(parseTraceLines(traceText)));
      state.measuresHtml = renderMeasures(await state.client.getMeasures(run_id));
      setNotice(`run ${run_id} completed`);
    } else {
      setNotice(`run ${run_id} failed`, true);
    }
  } catch (error) {
    setNotice(apiErrorText(error), true);
  } finally {
    state.running = false;
    redrawPlayground();
  }
}

async function exportBundle(): Promise<void> {
  const hash = await submitBundle();
  if (!hash) return;
  try {
    const text = await state.client.getBundleText(hash);
    const blob = new Blob([text], { type: "application/json" });
    const link = document.createElement("a");
    link.href = URL.createObjectURL(blob);
    link.download = "bundle.canon.json";
    link.click();
    URL.revokeObjectURL(link.href);
    setNotice(`exported bundle ${hash}`);
  } catch (error) {
    setNotice(apiErrorText(error), true);
  }
}

function redrawPlayground(): void {
  $("#run-controls").innerHTML = renderRunControls(state.running);
  $("#status-chip").innerHTML = renderStatusChip(state.poller?.record ?? state.lastRecord);
  $("#log-pane").innerHTML = renderLogPane(state.poller?.logText ?? "");
  $("#trace-pane").innerHTML = state.traceHtml;
  $("#measures-pane").innerHTML = state.measuresHtml;
  $("#bundle-hash").textContent = state.bundleHash;
  $("#run-button").addEventListener("click", () => void runInPlayground());
  $("#export-button").addEventListener("click", () => void exportBundle());
}

// ---- templates --------------------------------------------------------------

async function redrawTemplates(): Promise<void> {
  try {
    const { templates } = await state.client.listTemplates();
    $("#template-list").innerHTML = renderTemplateList(templates, state.selectedTemplate?.name ?? null);
    $("#template-detail").innerHTML = renderTemplateDetail(state.selectedTemplate);
  } catch (error) {
    $("#template-list").innerHTML = `<p class="error">${escapeHtml(apiErrorText(error))}</p>`;
  }
}

function bindTemplateEvents(): void {
  $("#templates").addEventListener("click", async (event) => {
    const target = event.target as HTMLElement;
    const name = target.getAttribute("data-template");
    const version = target.getAttribute("data-version");
    if (name && version) {
      try {
        state.selectedTemplate = await state.client.getTemplate(name, parseInt(version, 10));
        await redrawTemplates();
      } catch (error) {
        setNotice(apiErrorText(error), true);
      }
      return;
    }
    const useName = target.getAttribute("data-use-template");
    const useVersion = target.getAttribute("data-use-version");
    if (useName && useVersion && state.selectedTemplate) {
      state.template = {
        name: useName,
        version: parseInt(useVersion, 10),
        engineVersion: state.selectedTemplate.engine_version,
      };
      setNotice(`composer now targets (${useName}, v${useVersion})`);
      redrawComposer();
    }
  });
}

// ---- component editor ---------------------------------------------------------

function editorStateFromForm(): EditorState {
  return {
    namespace: ($("#ed-namespace") as HTMLInputElement).value,
    name: ($("#ed-name") as HTMLInputElement).value,
    category: ($("#ed-category") as HTMLSelectElement).value as Role,
    entrypoint: ($("#ed-entrypoint") as HTMLInputElement).value.split(/\s+/).filter(Boolean),
    code: ($("#ed-code") as HTMLTextAreaElement).value,
    codeFile: "main.py",
    schemaText: ($("#ed-schema") as HTMLTextAreaElement).value,
    external: ($("#ed-external") as HTMLInputElement).checked,
  };
}

function renderFindings(report: import("./types.js").CheckReportValue): string {
  if (report.ok && report.findings.length === 0) {
    return `<span class="badge pass">checks passed</span>`;
  }
  return report.findings
    .map((f) => `<div class="finding ${f.severity}"><code>${f.code}</code> ${escapeHtml(f.detail)}</div>`)
    .join("");
}

async function refreshHistory(headCommit: string): Promise<void> {
  const commits = await state.editor.history(headCommit);
  $("#ed-history").innerHTML = commits
    .map(
      (c) =>
        `<li><code class="hash">${c.commit_id.slice(0, 12)}</code> ${escapeHtml(c.message)} ` +
        `<small>${escapeHtml(c.author)}</small></li>`,
    )
    .join("");
}

function bindEditorEvents(): void {
  $("#ed-check").addEventListener("click", async () => {
    try {
      const report = await state.editor.check(editorStateFromForm());
      $("#ed-findings").innerHTML = renderFindings(report);
    } catch (error) {
      setNotice(apiErrorText(error), true);
    }
  });
  $("#ed-save").addEventListener("click", async () => {
    try {
      const formState = editorStateFromForm();
      const outcome = await state.editor.save(formState, "workbench", ($("#ed-message") as HTMLInputElement).value || "edit");
      $("#ed-findings").innerHTML = renderFindings(outcome.report);
      if (outcome.conflict) {
        setNotice("CONCURRENT_HEAD: someone else committed; reload history and retry", true);
        return;
      }
      if (outcome.committed) {
        setNotice(`saved as commit ${outcome.committed.commit_id}`);
        await refreshHistory(outcome.committed.commit_id);
        if (state.model && state.selectedNode) {
          // Make the fresh commit selectable on the canvas.
          const node = state.model.node(state.selectedNode);
          if (node && node.role === formState.category) {
            state.model.setRegistryComponent(state.selectedNode, formState.name, outcome.committed.commit_id);
            redrawComposer();
          }
        }
      } else {
        setNotice("save blocked by static-check findings", true);
      }
    } catch (error) {
      setNotice(apiErrorText(error), true);
    }
  });
}

// ---- tutorial -------------------------------------------------------------------

function redrawTutorial(): void {
  const step = state.tutorialStep;
  if (step < 0) {
    $("#tutorial-body").innerHTML =
      `<p>A guided walk through composing and piloting a simulated searcher ` +
      `over the demo template.</p><button id="tutorial-next">start tutorial</button>`;
  } else {
    const data = TUTORIAL_STEPS[step];
    const runHint = data.runAfter ? `<p><em>Now press "run in playground" and inspect the trace.</em></p>` : "";
    const nextLabel = step + 1 < TUTORIAL_STEPS.length ? "next step" : "restart";
    $("#tutorial-body").innerHTML =
      `<h3>${step + 1}/${TUTORIAL_STEPS.length}: ${escapeHtml(data.title)}</h3>` +
      `<p>${escapeHtml(data.text)}</p>${runHint}<button id="tutorial-next">${nextLabel}</button>`;
  }
  $("#tutorial-next").addEventListener("click", () => {
    state.tutorialStep = state.tutorialStep + 1 < TUTORIAL_STEPS.length ? state.tutorialStep + 1 : 0;
    const data = TUTORIAL_STEPS[state.tutorialStep];
    if (state.model) {
      data.apply(state.model);
      state.selectedNode = null;
      redrawComposer();
    }
    redrawTutorial();
  });
}

// ---- settings + boot ---------------------------------------------------------------

async function connect(): Promise<void> {
  state.client.baseUrl = ($("#base-url") as HTMLInputElement).value;
  state.client.token = ($("#token") as HTMLInputElement).value;
  localStorage.setItem("simdesk.base", state.client.baseUrl);
  localStorage.setItem("simdesk.token", state.client.token);
  try {
    const catalog = await state.client.getCatalog();
    state.model = new CanvasModel(catalog);
    state.editor = new EditorController(state.client);
    const { templates } = await state.client.listTemplates();
    if (templates.length > 0) {
      const first = templates[0];
      const template = await state.client.getTemplate(first.name, first.active);
      state.template = { name: first.name, version: first.active, engineVersion: template.engine_version };
    }
    setNotice(`connected: ${catalog.components.length} builtin components`);
    redrawComposer();
    redrawPlayground();
    await redrawTemplates();
    redrawTutorial();
  } catch (error) {
    setNotice(apiErrorText(error), true);
  }
}

function bindTabEvents(): void {
  document.querySelectorAll("[data-tab]").forEach((button) => {
    button.addEventListener("click", () => {
      const tab = button.getAttribute("data-tab")!;
      document.querySelectorAll(".tab-page").forEach((page) => page.classList.add("hidden"));
      $(`#${tab}`).classList.remove("hidden");
      document.querySelectorAll("[data-tab]").forEach((b) => b.classList.remove("active"));
      button.classList.add("active");
    });
  });
}

export function boot(): void {
  bindTabEvents();
  bindComposerEvents();
  bindTemplateEvents();
  bindEditorEvents();
  ($("#base-url") as HTMLInputElement).value = state.client.baseUrl || window.location.origin;
  ($("#token") as HTMLInputElement).value = state.client.token;
  $("#connect-btn").addEventListener("click", () => void connect());
  ($("#ed-code") as HTMLTextAreaElement).value = state.editorState.code;
  redrawTutorial();
  setNotice("set the API address and connect");
}

if (typeof document !== "undefined" && document.getElementById("app-root")) {
  boot();
}
