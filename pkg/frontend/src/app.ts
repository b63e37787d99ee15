/**
 * Minimal browser shell wiring the studio modules into a page: a design
 * selector and member editor on the left, the 3D result viewport on the
 * right, and the measuring table below. All state lives in the tested
 * modules; this file is DOM glue only.
 */
import * as THREE from "three";
import { WorkbenchClient, JobFailedError } from "./api.js";
import { renderLayoutSvg, InlineValidationError, EditField } from "./design.js";
import { MeasurePanel, compareReports } from "./measure.js";
import { StudioSession } from "./session.js";
import { ResultViewer, StageId } from "./viewer.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  if (text !== undefined) node.textContent = text;
  return node;
}

export function mountStudio(root: HTMLElement, baseUrl: string): void {
  const client = new WorkbenchClient(baseUrl);
  const viewer = new ResultViewer();
  const session = new StudioSession(client, viewer);
  const panel = new MeasurePanel(client);

  const layout = el("div", { class: "studio" });
  const left = el("div", { class: "studio-editor" });
  const right = el("div", { class: "studio-viewport" });
  const bottom = el("div", { class: "studio-measure" });
  layout.append(left, right, bottom);
  root.append(layout);

  const status = el("p", { class: "status" }, "pick a design");
  const designSelect = el("select", { class: "design-select" });
  const layoutHost = el("div", { class: "layout-2d" });
  const editForm = el("div", { class: "edit-form" });
  const runButton = el("button", {}, "save + run");
  const stageToggle = el("button", {}, "show stage a");
  const historyList = el("ol", { class: "history" });
  const measureTable = el("table", { class: "pairs" });
  left.append(designSelect, layoutHost, editForm, runButton, status);
  right.append(stageToggle);
  bottom.append(measureTable, historyList);

  const say = (text: string) => {
    status.textContent = text;
  };

  // 3D canvas: fall back to a note when WebGL is unavailable.
  let render: () => void = () => {};
  try {
    const renderer = new THREE.WebGLRenderer({ antialias: true });
    renderer.setSize(640, 480);
    right.append(renderer.domElement);
    const camera = new THREE.PerspectiveCamera(45, 640 / 480, 0.1, 5000);
    camera.position.set(120, -220, 160);
    camera.up.set(0, 0, 1);
    camera.lookAt(new THREE.Vector3(100, 0, 0));
    render = () => renderer.render(viewer.scene, camera);
  } catch {
    right.append(el("p", {}, "WebGL unavailable; geometry loads but is not drawn"));
  }

  const refreshLayout = () => {
    layoutHost.innerHTML = renderLayoutSvg(session.openDesign.design);
  };

  const refreshHistory = () => {
    historyList.replaceChildren(
      ...session.history.map((entry) =>
        el(
          "li",
          {},
          `#${entry.sequence} ${entry.designName} -> ${entry.stateRef}` +
            (entry.accuracySummary ? ` | ${entry.accuracySummary}` : ""),
        ),
      ),
    );
    const h = session.history;
    if (h.length >= 2) {
      const before = h[h.length - 2]!.report;
      const after = h[h.length - 1]!.report;
      if (before && after) {
        for (const d of compareReports(before, after)) {
          historyList.append(el("li", { class: "delta" }, `${d.label}: ${d.before} -> ${d.after} (${d.delta})`));
        }
      }
    }
  };

  const showReport = (rows: { label: string; experimentMm: string; simulationMm: string; errorPercent: string; accuracy: string; flagged: boolean }[], summaryLine: string) => {
    measureTable.replaceChildren(
      el("tr", {}, undefined),
    );
    const header = measureTable.rows[0]!;
    for (const text of ["pair", "exp (mm)", "sim (mm)", "err %", "acc"]) {
      header.append(el("th", {}, text));
    }
    for (const row of rows) {
      const tr = el("tr", row.flagged ? { class: "flagged" } : {});
      for (const text of [
        row.label,
        row.experimentMm,
        row.simulationMm,
        row.errorPercent + (row.flagged ? " *" : ""),
        row.accuracy,
      ]) {
        tr.append(el("td", {}, text));
      }
      measureTable.append(tr);
    }
    bottom.append(el("p", { class: "summary" }, summaryLine));
  };

  designSelect.addEventListener("change", () => {
    void (async () => {
      try {
        await session.open(designSelect.value);
        refreshLayout();
        say(`opened ${designSelect.value}`);
        buildEditForm();
      } catch (exc) {
        say(String(exc));
      }
    })();
  });

  function buildEditForm(): void {
    editForm.replaceChildren();
    for (const member of session.openDesign.design.members) {
      if (member.kind !== "bending_unit") continue;
      const row = el("div", { class: "edit-row" });
      row.append(el("span", {}, member.id));
      for (const field of ["actuator_ratio", "sigma0", "material"] as EditField[]) {
        const input = el("input", { "data-member": member.id, "data-field": field });
        input.value =
          field === "actuator_ratio"
            ? String(member.spec.actuator_ratio)
            : field === "sigma0"
              ? String(member.spec.sigma0_mpa)
              : member.spec.actuator_material;
        input.addEventListener("change", () => {
          try {
            const value = field === "material" ? input.value : Number(input.value);
            session.edit({ memberId: member.id, field, value });
            refreshLayout();
            say(`${member.id}.${field} = ${input.value} (unsaved)`);
          } catch (exc) {
            if (exc instanceof InlineValidationError) say(exc.message);
            else say(String(exc));
          }
        });
        row.append(input);
      }
      editForm.append(row);
    }
  }

  stageToggle.addEventListener("click", () => {
    const next: StageId = viewer.activeStage === "b" ? "a" : "b";
    viewer.showStage(next);
    stageToggle.textContent = `show stage ${next === "b" ? "a" : "b"}`;
    render();
  });

  runButton.addEventListener("click", () => {
    void (async () => {
      try {
        const saved = await session.save();
        if (saved.status === "conflict") {
          say(`save conflict: ${saved.message} (refresh to load the latest version)`);
          return;
        }
        say("simulating...");
        const { entry } = await session.runAndView();
        say(`done: ${entry.stateRef}`);
        render();
        refreshHistory();
      } catch (exc) {
        if (exc instanceof JobFailedError) {
          say(`simulation failed:\n${exc.logExcerpt}`);
        } else {
          say(String(exc));
        }
      }
    })();
  });

  void (async () => {
    const names = await session.listDesigns();
    designSelect.replaceChildren(...names.map((n) => el("option", { value: n }, n)));
    say(names.length ? "pick a design" : "project has no designs yet");
  })();

  // Expose the measuring panel for the pair table (used via the console or
  // future pick handlers); keeps the shell minimal.
  (root as HTMLElement & { morphgridStudio?: unknown }).morphgridStudio = {
    session,
    panel,
    viewer,
    showReport,
  };
}
