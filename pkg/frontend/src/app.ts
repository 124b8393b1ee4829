// The analyst dashboard: work-item queue, smart views and the query
// console. The client holds no audit truth of its own; every screen is
// re-rendered from the latest server payload, and every mutation waits for
// the server's response before anything on screen changes.

import { ApiRequestError, AuditApi } from "./api.js";
import type { NodeSearchHit, QueryResult, WorkItemPayload } from "./api.js";
import { clear, el } from "./dom.js";
import { renderGraphSvg } from "./graphsvg.js";
import {
  CATEGORIES,
  SMART_VIEW_KINDS,
  graphView,
  markErrorOffset,
  queueRow,
} from "./model.js";

type ViewName = "queue" | "smartview" | "console";

export class DashboardApp {
  view: ViewName = "queue";
  categoryFilter = "";
  reviewedFilter = "";
  items: WorkItemPayload[] = [];
  selection: NodeSearchHit | null = null;
  viewKind: string = "REVERSE_DATA";
  viewSteps: string = "fixpoint";
  lastSmartView: QueryResult | null = null;
  consoleScript = "universe().edgesTaggedAny(CALL).retainEdges()";

  private banner: HTMLElement;
  private content: HTMLElement;
  private header: HTMLElement;
  private lastAction: (() => Promise<void>) | null = null;

  constructor(
    root: HTMLElement,
    private api: AuditApi,
  ) {
    this.header = el("header", { class: "topbar" });
    this.banner = el("div", { class: "banner hidden" });
    this.content = el("main", { class: "content" });
    root.append(this.header, this.banner, this.content);
  }

  async start(): Promise<void> {
    await this.guard(async () => {
      const summary = await this.api.graphSummary();
      this.renderHeader(summary.app, summary.nodes, summary.edges);
      await this.refreshItems();
      this.render();
    });
  }

  // -- error surface -------------------------------------------------------

  private async guard(action: () => Promise<void>): Promise<void> {
    this.lastAction = action;
    try {
      await action();
      this.banner.classList.add("hidden");
      clear(this.banner);
    } catch (err) {
      this.showError(err);
    }
  }

  private showError(err: unknown): void {
    clear(this.banner);
    const message =
      err instanceof ApiRequestError
        ? `${err.code}: ${err.message}`
        : String(err);
    this.banner.append(
      el("span", { class: "banner-text" }, message),
      el(
        "button",
        {
          class: "retry",
          onClick: () => {
            if (this.lastAction) void this.guard(this.lastAction);
          },
        },
        "retry",
      ),
    );
    this.banner.classList.remove("hidden");
  }

  // -- shell -----------------------------------------------------------------

  private renderHeader(app: string, nodes: number, edges: number): void {
    clear(this.header);
    const tab = (name: ViewName, label: string) =>
      el(
        "button",
        {
          class: `tab ${this.view === name ? "active" : ""}`,
          "data-tab": name,
          onClick: () => {
            this.view = name;
            this.renderHeader(app, nodes, edges);
            this.render();
          },
        },
        label,
      );
    this.header.append(
      el("span", { class: "brand" }, "graphaudit"),
      el("span", { class: "appname" }, `${app} · ${nodes} nodes · ${edges} edges`),
      tab("queue", "Work items"),
      tab("smartview", "Smart view"),
      tab("console", "Query console"),
    );
  }

  render(): void {
    clear(this.content);
    if (this.view === "queue") this.renderQueue();
    else if (this.view === "smartview") this.renderSmartView();
    else this.renderConsole();
  }

  // -- queue screen --------------------------------------------------------------

  async refreshItems(): Promise<void> {
    const reviewed =
      this.reviewedFilter === "" ? undefined : this.reviewedFilter === "true";
    this.items = await this.api.listWorkItems(
      this.categoryFilter || undefined,
      reviewed,
    );
  }

  private async applyFilters(): Promise<void> {
    await this.guard(async () => {
      await this.refreshItems();
      this.render();
    });
  }

  private renderQueue(): void {
    const filterBar = el(
      "div",
      { class: "filterbar" },
      el(
        "select",
        {
          "data-role": "category-filter",
          onChange: (ev: Event) => {
            this.categoryFilter = (ev.target as HTMLSelectElement).value;
            void this.applyFilters();
          },
        },
        el("option", { value: "" }, "all categories"),
        ...CATEGORIES.map((c) =>
          el("option", { value: c, selected: c === this.categoryFilter }, c),
        ),
      ),
      el(
        "select",
        {
          "data-role": "reviewed-filter",
          onChange: (ev: Event) => {
            this.reviewedFilter = (ev.target as HTMLSelectElement).value;
            void this.applyFilters();
          },
        },
        el("option", { value: "" }, "reviewed + unreviewed"),
        el("option", { value: "false", selected: this.reviewedFilter === "false" }, "unreviewed only"),
        el("option", { value: "true", selected: this.reviewedFilter === "true" }, "reviewed only"),
      ),
      el(
        "button",
        {
          "data-role": "run-analyzers",
          onClick: () =>
            void this.guard(async () => {
              await this.api.runAnalyzers();
              await this.refreshItems();
              this.render();
            }),
        },
        "run analyzers",
      ),
    );

    const list = el("div", { class: "queue", "data-role": "queue" });
    if (this.items.length === 0) {
      list.append(el("p", { class: "empty-note" }, "no work items (run analyzers or relax filters)"));
    }
    for (const item of this.items) {
      list.append(this.renderQueueItem(item));
    }
    this.content.append(filterBar, list);
  }

  private renderQueueItem(item: WorkItemPayload): HTMLElement {
    const row = queueRow(item);
    const card = el("section", {
      class: `workitem ${row.reviewed ? "reviewed" : ""}`,
      "data-item-id": row.id,
    });
    if (row.color) card.style.borderLeftColor = row.color;

    const nameInput = el("input", {
      class: "item-name",
      value: row.name,
      "data-role": "name",
    }) as HTMLInputElement;
    nameInput.addEventListener("change", () =>
      void this.patchItem(item.id, { name: nameInput.value }),
    );
    const colorInput = el("input", {
      class: "item-color",
      value: row.color,
      placeholder: "color",
      "data-role": "color",
    }) as HTMLInputElement;
    colorInput.addEventListener("change", () =>
      void this.patchItem(item.id, { color: colorInput.value }),
    );
    const reviewedBox = el("input", {
      type: "checkbox",
      checked: row.reviewed,
      "data-role": "reviewed",
    }) as HTMLInputElement;
    reviewedBox.addEventListener("change", () =>
      void this.patchItem(item.id, { reviewed: reviewedBox.checked }),
    );
    const notes = el("textarea", {
      class: "item-notes",
      placeholder: "notes",
      "data-role": "notes",
    }) as HTMLTextAreaElement;
    notes.value = row.notes;
    notes.addEventListener("change", () =>
      void this.patchItem(item.id, { notes: notes.value }),
    );

    card.append(
      el(
        "div",
        { class: "item-head" },
        el("span", { class: "item-id" }, row.id),
        nameInput,
        el("span", { class: `badge cat-${row.category.toLowerCase()}` }, row.category),
        el("span", { class: "analyzer" }, row.analyzer),
        el("span", { class: "findings" }, `${row.findingCount} finding(s)`),
        el("label", { class: "reviewed-label" }, reviewedBox, " reviewed"),
        colorInput,
        el(
          "button",
          {
            "data-role": "evidence",
            onClick: () =>
              void this.guard(async () => {
                const full = await this.api.getWorkItem(item.id);
                this.renderEvidence(card, full);
              }),
          },
          "evidence",
        ),
      ),
      el(
        "ul",
        { class: "finding-list" },
        ...row.messages.map((m) => el("li", {}, m)),
      ),
      notes,
    );
    return card;
  }

  private renderEvidence(card: HTMLElement, item: WorkItemPayload): void {
    card.querySelector(".evidence")?.remove();
    const host = el("div", { class: "evidence" });
    if (item.effectiveSubgraph) {
      host.append(renderGraphSvg(graphView(item.effectiveSubgraph)));
    }
    card.append(host);
  }

  private async patchItem(
    id: string,
    patch: { reviewed?: boolean; notes?: string; name?: string; color?: string },
  ): Promise<void> {
    await this.guard(async () => {
      await this.api.patchWorkItem(id, patch);
      // Re-list through the API so filters and state reflect the server.
      await this.refreshItems();
      this.render();
    });
  }

  // -- smart view screen ------------------------------------------------------------

  private renderSmartView(): void {
    const results = el("div", { class: "search-results", "data-role": "search-results" });
    const searchBox = el("input", {
      class: "node-search",
      placeholder: "find node by name...",
      "data-role": "node-search",
    }) as HTMLInputElement;
    searchBox.addEventListener("change", () =>
      void this.guard(async () => {
        const hits = await this.api.searchNodes(searchBox.value);
        clear(results);
        for (const hit of hits) {
          results.append(
            el(
              "button",
              {
                class: "search-hit",
                "data-node-id": hit.id,
                onClick: () => {
                  this.selection = hit;
                  void this.runSmartView();
                },
              },
              `${hit.name} [${hit.tags.join(" ")}] ${hit.id}`,
            ),
          );
        }
      }),
    );

    const kindSelect = el(
      "select",
      {
        "data-role": "view-kind",
        onChange: (ev: Event) => {
          this.viewKind = (ev.target as HTMLSelectElement).value;
          if (this.selection) void this.runSmartView();
        },
      },
      ...SMART_VIEW_KINDS.map((k) =>
        el("option", { value: k, selected: k === this.viewKind }, k),
      ),
    );
    const stepsSelect = el(
      "select",
      {
        "data-role": "view-steps",
        onChange: (ev: Event) => {
          this.viewSteps = (ev.target as HTMLSelectElement).value;
          if (this.selection) void this.runSmartView();
        },
      },
      ...["fixpoint", "1", "2", "3"].map((s) =>
        el("option", { value: s, selected: s === this.viewSteps }, s),
      ),
    );

    const selectionLabel = el(
      "span",
      { class: "selection-label", "data-role": "selection" },
      this.selection
        ? `${this.selection.name} (${this.selection.id})`
        : "nothing selected",
    );

    this.content.append(
      el("div", { class: "viewbar" }, searchBox, kindSelect, stepsSelect, selectionLabel),
      results,
      this.renderSmartViewResult(),
    );
  }

  private renderSmartViewResult(): HTMLElement {
    const host = el("div", { class: "view-result", "data-role": "view-result" });
    if (!this.lastSmartView) {
      host.append(el("p", { class: "empty-note" }, "select a node to slice from"));
      return host;
    }
    if (this.lastSmartView.empty) {
      host.append(el("p", { class: "empty-note" }, "empty slice"));
      return host;
    }
    host.append(
      renderGraphSvg(graphView(this.lastSmartView.subgraph), (node) => {
        // Clicking a rendered node re-issues the view from that node.
        this.selection = { id: node.id, name: node.label, tags: node.kinds };
        void this.runSmartView();
      }),
    );
    return host;
  }

  async runSmartView(): Promise<void> {
    await this.guard(async () => {
      if (!this.selection) return;
      const steps =
        this.viewSteps === "fixpoint" ? "fixpoint" : Number(this.viewSteps);
      this.lastSmartView = await this.api.smartView(
        [this.selection.id],
        this.viewKind,
        steps as number | "fixpoint",
      );
      this.render();
    });
  }

  // -- query console -------------------------------------------------------------------

  private renderConsole(): void {
    const input = el("textarea", {
      class: "console-input",
      "data-role": "console-input",
      rows: "6",
    }) as HTMLTextAreaElement;
    input.value = this.consoleScript;
    input.addEventListener("change", () => {
      this.consoleScript = input.value;
    });
    const output = el("div", { class: "console-output", "data-role": "console-output" });
    const run = el(
      "button",
      {
        "data-role": "console-run",
        onClick: () => void this.runConsole(input.value, output),
      },
      "run query",
    );
    this.content.append(
      el("div", { class: "consolebar" }, run),
      input,
      output,
    );
  }

  async runConsole(script: string, output: HTMLElement): Promise<void> {
    this.consoleScript = script;
    clear(output);
    try {
      const result = await this.api.query(script);
      if (result.empty) {
        output.append(
          el(
            "p",
            { class: "satisfied-banner", "data-role": "satisfied" },
            "property satisfied (empty envelope)",
          ),
        );
      } else {
        output.append(renderGraphSvg(graphView(result.subgraph)));
      }
      output.append(
        el("pre", { class: "raw-json", "data-role": "raw-json" },
           JSON.stringify(result.subgraph, null, 2)),
      );
    } catch (err) {
      if (err instanceof ApiRequestError) {
        const offset = typeof err.detail["offset"] === "number"
          ? (err.detail["offset"] as number)
          : null;
        output.append(
          el(
            "pre",
            { class: "console-error", "data-role": "console-error" },
            offset === null
              ? err.message
              : `${err.message}\n${markErrorOffset(script, offset)}`,
          ),
        );
      } else {
        this.showError(err);
      }
    }
  }
}

export function boot(root: HTMLElement, baseUrl = ""): DashboardApp {
  const app = new DashboardApp(root, new AuditApi(baseUrl));
  void app.start();
  return app;
}
