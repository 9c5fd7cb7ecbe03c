/**
 * DOM rendering and keyboard wiring for the review screen.
 *
 * Layout: image on the left, one candidate quadruple on the right with
 * accept / reject / unsure controls. Keyboard: A, R, U decide; Z undoes.
 */

import type { Progress, ReviewCard } from "./api.js";
import { ReviewApi } from "./api.js";
import { ReviewController, ViewState } from "./controller.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function severityBadgeText(severity: number): string {
  return `${severity} / 100`;
}

export class ReviewScreen {
  readonly controller: ReviewController;
  private readonly api: ReviewApi;

  private readonly imagePane = el("div", "image-pane");
  private readonly cardPane = el("div", "card-pane");
  private readonly progressBar = el("header", "progress");
  private readonly banner = el("div", "banner hidden");

  constructor(root: HTMLElement, api: ReviewApi, annotator: string, retryDelayMs = 800) {
    this.api = api;
    this.controller = new ReviewController(
      api,
      annotator,
      {
        onState: (state) => this.renderState(state),
        onProgress: (progress) => this.renderProgress(progress),
        onBanner: (message) => this.renderBanner(message),
      },
      retryDelayMs,
    );

    const layout = el("main", "review-layout");
    layout.append(this.imagePane, this.cardPane);
    root.replaceChildren(this.progressBar, this.banner, layout);

    document.addEventListener("keydown", (event) => {
      if (event.target instanceof HTMLInputElement) return;
      void this.controller.handleKey(event.key);
    });
  }

  start(): Promise<void> {
    return this.controller.start();
  }

  private renderProgress(progress: Progress): void {
    this.progressBar.textContent =
      `pending ${progress.pending} · accepted ${progress.accepted} · ` +
      `rejected ${progress.rejected} · unsure ${progress.unsure}`;
  }

  private renderBanner(message: string | null): void {
    if (message === null) {
      this.banner.className = "banner hidden";
      this.banner.replaceChildren();
      return;
    }
    this.banner.className = "banner";
    const retry = el("button", "retry", "retry now");
    retry.addEventListener("click", () => this.controller.retryDelivery());
    this.banner.replaceChildren(el("span", "banner-text", message), retry);
  }

  private renderState(state: ViewState): void {
    switch (state.kind) {
      case "idle":
      case "loading":
        this.cardPane.replaceChildren(el("p", "loading", "loading…"));
        return;
      case "error":
        this.cardPane.replaceChildren(
          el("p", "error", `cannot load the queue: ${state.message}`),
        );
        return;
      case "done":
        this.imagePane.replaceChildren();
        this.cardPane.replaceChildren(
          el("h2", "done-title", "queue complete"),
          el(
            "p",
            "done-counts",
            `accepted ${state.progress.accepted}, rejected ${state.progress.rejected}, ` +
              `unsure ${state.progress.unsure}`,
          ),
          el("p", "done-hint", "press Z to revisit your last decision"),
        );
        return;
      case "card":
        this.renderCard(state.card, state.undone);
    }
  }

  private renderCard(card: ReviewCard, undone: boolean): void {
    const image = el("img", "candidate-image");
    image.src = this.api.imageUrl(card);
    image.alt = card.image_id;
    this.imagePane.replaceChildren(image);

    const header = el("div", "card-header");
    header.append(
      el("h2", "anomaly-name", card.anomaly.name),
      el("span", "severity-badge", severityBadgeText(card.anomaly.severity)),
    );

    const question = el(
      "p",
      "question",
      "Is this structured description correct for the given image?",
    );

    const phenomenon = el("section", "field phenomenon");
    phenomenon.append(el("h3", undefined, "Phenomenon"), el("p", undefined, card.anomaly.phenomenon));
    const reasoning = el("section", "field reasoning");
    reasoning.append(el("h3", undefined, "Reasoning"), el("p", undefined, card.anomaly.reasoning));

    const controls = el("div", "controls");
    for (const [label, decision, key] of [
      ["Accept", "accept", "A"],
      ["Reject", "reject", "R"],
      ["Unsure", "unsure", "U"],
    ] as const) {
      const button = el("button", `decide ${decision}`, `${label} (${key})`);
      button.addEventListener("click", () => void this.controller.decide(decision));
      controls.append(button);
    }
    const undo = el("button", "undo", "Undo (Z)");
    undo.addEventListener("click", () => this.controller.undo());
    controls.append(undo);

    const children: HTMLElement[] = [header, question, phenomenon, reasoning, controls];
    if (undone) {
      children.unshift(el("p", "undo-note", "revisiting your previous decision"));
    }
    this.cardPane.replaceChildren(...children);
  }
}

export interface AppConfig {
  baseUrl?: string;
  annotator?: string;
}

export function createApp(root: HTMLElement, config: AppConfig = {}): ReviewScreen {
  const baseUrl = config.baseUrl ?? "";
  const params = new URLSearchParams(window.location.search);
  const annotator =
    config.annotator ?? params.get("annotator") ?? window.prompt("annotator id?") ?? "anonymous";
  return new ReviewScreen(root, new ReviewApi(baseUrl), annotator);
}
