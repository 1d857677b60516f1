/** Single-page review app: ranked list with ratings, PCA scatter, retrain. */

import { ApiClient, ApiError } from './api.js';
import { buildScatterSvg } from './scatter.js';
import type { Insight, Rating } from './types.js';
import { RATING_ORDER, RATING_TEXT } from './types.js';

const api = new ApiClient('');

interface AppState {
  insights: Insight[];
  ratedSinceLoad: number;
  retraining: boolean;
  texts: Map<string, string>;
}

const state: AppState = {
  insights: [],
  ratedSinceLoad: 0,
  retraining: false,
  texts: new Map(),
};

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

function showBanner(message: string, retry?: () => void): void {
  const banner = document.getElementById('banner')!;
  banner.innerHTML = '';
  banner.classList.remove('hidden');
  banner.appendChild(el('span', undefined, message));
  if (retry) {
    const button = el('button', 'retry', 'retry');
    button.addEventListener('click', () => {
      banner.classList.add('hidden');
      retry();
    });
    banner.appendChild(button);
  }
}

function hideBanner(): void {
  document.getElementById('banner')!.classList.add('hidden');
}

function describe(error: unknown): string {
  if (error instanceof ApiError) {
    return error.status === 0 ? `API unreachable: ${error.detail}` : error.detail;
  }
  return String(error);
}

function ratingControl(insight: Insight): HTMLElement {
  const group = el('div', 'rating-group');
  for (const rating of RATING_ORDER) {
    const label = el('label', 'rating-option');
    const input = el('input');
    input.type = 'radio';
    input.name = `rating-${insight.candidate_id}`;
    input.value = rating;
    input.checked = insight.rating === rating;
    input.addEventListener('change', () => void submitRating(insight.candidate_id, rating));
    label.appendChild(input);
    label.appendChild(el('span', undefined, RATING_TEXT[rating]));
    group.appendChild(label);
  }
  return group;
}

function renderList(): void {
  const list = document.getElementById('insight-list')!;
  list.innerHTML = '';
  state.insights.forEach((insight, index) => {
    const card = el('article', 'card');
    const head = el('header', 'card-head');
    head.appendChild(el('span', 'rank', `#${index + 1}`));
    head.appendChild(el('span', 'score', `score ${insight.score_f.toFixed(3)}`));
    head.appendChild(
      el('span', 'pvalue', `p=${insight.test.p_value.toExponential(2)} (${insight.test.method})`),
    );
    card.appendChild(head);
    card.appendChild(el('p', 'text', insight.text));
    card.appendChild(ratingControl(insight));
    list.appendChild(card);
  });
  updateRetrainButton();
}

async function submitRating(candidateId: string, rating: Rating): Promise<void> {
  try {
    await api.postFeedback(candidateId, rating);
    hideBanner();
    state.ratedSinceLoad += 1;
    const insight = state.insights.find((i) => i.candidate_id === candidateId);
    if (insight) insight.rating = rating;
    updateRetrainButton();
    await renderScatter(); // recolor without a full reload
  } catch (error) {
    showBanner(`rating failed: ${describe(error)}`, () => void submitRating(candidateId, rating));
  }
}

function anyRated(): boolean {
  return state.ratedSinceLoad > 0 || state.insights.some((i) => i.rating !== null);
}

function updateRetrainButton(): void {
  const button = document.getElementById('retrain') as HTMLButtonElement;
  button.disabled = state.retraining || !anyRated();
  button.textContent = state.retraining ? 'retraining…' : 'retrain';
}

async function retrain(): Promise<void> {
  if (state.retraining) return;
  state.retraining = true;
  updateRetrainButton();
  const summaryNode = document.getElementById('retrain-summary')!;
  try {
    const summary = await api.postRetrain();
    const mse = summary.final_mse === null ? 'n/a' : summary.final_mse.toExponential(2);
    summaryNode.textContent =
      `retrained on ${summary.seeds} ratings (+${summary.pseudo_labeled} pseudo-labels), ` +
      `MSE ${mse}; selection +${summary.added.length}/-${summary.removed.length}`;
    hideBanner();
    await refresh();
  } catch (error) {
    if (error instanceof ApiError && error.status === 409) {
      showBanner('retrain in progress, try again shortly');
    } else if (error instanceof ApiError && error.status === 400) {
      showBanner(`retrain rejected: ${error.detail}`);
    } else {
      showBanner(`retrain failed: ${describe(error)}`, () => void retrain());
    }
  } finally {
    state.retraining = false;
    updateRetrainButton();
  }
}

async function renderScatter(): Promise<void> {
  const host = document.getElementById('scatter')!;
  try {
    const pca = await api.getPca();
    if (pca.points.length < 2) {
      host.textContent = 'not enough insights for a projection';
      return;
    }
    host.innerHTML = buildScatterSvg(pca.points, state.texts, pca.explained_variance);
  } catch (error) {
    host.textContent = `scatter unavailable: ${describe(error)}`;
  }
}

async function refresh(): Promise<void> {
  try {
    const [selection, all] = await Promise.all([api.getInsights(), api.getAllInsights()]);
    state.insights = selection;
    state.texts = new Map(all.map((i) => [i.candidate_id, i.text]));
    hideBanner();
    renderList();
    await renderScatter();
  } catch (error) {
    showBanner(`failed to load insights: ${describe(error)}`, () => void refresh());
  }
}

export function start(): void {
  document.getElementById('retrain')!.addEventListener('click', () => void retrain());
  void refresh();
  // discrete review rounds: slow poll keeps a long-open tab consistent
  window.setInterval(() => void refresh(), 60_000);
}

if (typeof document !== 'undefined' && document.getElementById('insight-list')) {
  start();
}
