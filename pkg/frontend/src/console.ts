/**
 * Browser wiring: mounts the search view, routes to plate detail on
 * hash change, and hooks the correction form to the flow.
 */

import { QueryServiceClient } from './api.js';
import type { SearchFilters } from './api.js';
import { correctionFlow, selectableLabels } from './corrections.js';
import { renderPlateDetail } from './detail.js';
import { escapeHtml, renderFilterPanel, renderResultsGrid } from './search.js';
import { ALL_TASKS } from './types.js';
import type { PlateProfile, TaskName, TaxonomyMap } from './types.js';

const DEFAULT_LIMIT = 50;

export class Console {
  private taxonomies: TaxonomyMap = {};

  constructor(
    private readonly client: QueryServiceClient,
    private readonly root: HTMLElement,
  ) {}

  async start(): Promise<void> {
    this.taxonomies = await this.client.taxonomies();
    this.root.innerHTML =
      '<div id="filters"></div><div id="results"></div><div id="detail"></div>';
    this.mountFilters();
    window.addEventListener('hashchange', () => void this.route());
    await this.route();
  }

  private mountFilters(): void {
    const host = this.root.querySelector('#filters')!;
    host.innerHTML = renderFilterPanel(this.taxonomies);
    const form = host.querySelector<HTMLFormElement>('#filter-panel')!;
    form.addEventListener('submit', (event) => {
      event.preventDefault();
      void this.runSearch(this.readFilters(form));
    });
    form
      .querySelector<HTMLInputElement>('input[name="include_unknown"]')!
      .addEventListener('change', () => void this.runSearch(this.readFilters(form)));
  }

  private readFilters(form: HTMLFormElement): SearchFilters {
    const filters: SearchFilters = { offset: 0, limit: DEFAULT_LIMIT };
    for (const task of ALL_TASKS) {
      const picked = [
        ...form.querySelectorAll<HTMLInputElement>(`input[name="${task}"]:checked`),
      ].map((input) => input.value);
      if (picked.length > 0) filters[task] = picked;
    }
    const from = form.querySelector<HTMLInputElement>('input[name="from"]')!.value;
    const to = form.querySelector<HTMLInputElement>('input[name="to"]')!.value;
    if (from) filters.from = new Date(from).toISOString();
    if (to) filters.to = new Date(to).toISOString();
    filters.includeUnknown = form.querySelector<HTMLInputElement>(
      'input[name="include_unknown"]',
    )!.checked;
    return filters;
  }

  private async runSearch(filters: SearchFilters): Promise<void> {
    const host = this.root.querySelector('#results')!;
    try {
      const response = await this.client.search(filters);
      host.innerHTML = renderResultsGrid(response);
    } catch (error) {
      host.innerHTML =
        `<p class="error">Search failed: ${escapeHtml(String(error))} ` +
        '<button id="retry">retry</button></p>';
      host.querySelector('#retry')!.addEventListener('click', () => {
        void this.runSearch(filters);
      });
    }
  }

  private async route(): Promise<void> {
    const hash = window.location.hash;
    const match = /^#plate\/(.+)$/.exec(hash);
    if (match) {
      await this.showDetail(decodeURIComponent(match[1]!));
    }
  }

  private async showDetail(plateId: string): Promise<void> {
    const host = this.root.querySelector('#detail')!;
    let profile: PlateProfile;
    try {
      profile = await this.client.getPlate(plateId);
    } catch {
      window.location.hash = '';
      host.innerHTML = '';
      return;
    }
    this.renderDetail(profile);
  }

  private renderDetail(profile: PlateProfile): void {
    const host = this.root.querySelector('#detail')!;
    host.innerHTML = renderPlateDetail(profile) + this.correctionForm(profile);
    const form = host.querySelector<HTMLFormElement>('#correction-form');
    form?.addEventListener('submit', (event) => {
      event.preventDefault();
      const task = form.querySelector<HTMLSelectElement>('select[name="task"]')!
        .value as TaskName;
      const label = form.querySelector<HTMLSelectElement>('select[name="label"]')!.value;
      const author = form.querySelector<HTMLInputElement>('input[name="author"]')!.value;
      void correctionFlow(this.client, profile, task, label, author, (update) => {
        if (update.phase === 'rolled_back') {
          this.renderDetail(update.profile);
          const message = document.createElement('p');
          message.className = 'error';
          message.textContent = `Correction rejected: ${update.error ?? 'unknown error'}`;
          this.root.querySelector('#detail')!.prepend(message);
        } else {
          this.renderDetail(update.profile);
        }
      });
    });
  }

  private correctionForm(profile: PlateProfile): string {
    const taskOptions = ALL_TASKS.filter((task) => profile.tasks[task])
      .map((task) => `<option value="${task}">${task}</option>`)
      .join('');
    const first = ALL_TASKS.find((task) => profile.tasks[task]);
    const labels = selectableLabels(first ? this.taxonomies[first]?.labels : [])
      .map((label) => `<option value="${escapeHtml(label)}">${escapeHtml(label)}</option>`)
      .join('');
    return (
      '<form id="correction-form"><h3>Submit correction</h3>' +
      `<select name="task">${taskOptions}</select>` +
      `<select name="label">${labels}</select>` +
      '<input name="author" placeholder="your id" required>' +
      '<button type="submit">Correct</button></form>'
    );
  }
}

export function mount(baseUrl: string, rootId = 'app'): Console {
  const root = document.getElementById(rootId);
  if (!root) throw new Error(`no #${rootId} element to mount on`);
  const console_ = new Console(new QueryServiceClient(baseUrl), root);
  void console_.start();
  return console_;
}
