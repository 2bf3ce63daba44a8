/**
 * DOM wiring for the assessor console.
 *
 * Renders from SessionViewState and API responses only; submissions go
 * through the documented endpoints and the server response is authoritative
 * (no optimistic updates).
 */

import { ApiClient, ApiError } from './api.js';
import { SessionViewState } from './state.js';
import { ManualWizard, OUTCOMES } from './wizard.js';
import type {
  Outcome,
  PendingEntry,
  ProtocolDocument,
  ReportDocument,
  SessionSummary,
} from './types.js';

const api = new ApiClient('');

let currentSessionId: string | null = null;
let viewState: SessionViewState | null = null;
let pendingQueue: PendingEntry[] = [];
let wizard: ManualWizard | null = null;
let executing = false;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

function notice(text: string, kind: 'info' | 'error' = 'info'): void {
  const bar = el<HTMLDivElement>('notice');
  bar.textContent = text;
  bar.className = `notice ${kind}`;
  bar.hidden = text === '';
}

function describeError(error: unknown): string {
  if (error instanceof ApiError) {
    return `${error.code}: ${error.message}`;
  }
  return String(error);
}

// ---------------------------------------------------------------------------
// session list

async function refreshSessionList(): Promise<void> {
  const sessions = await api.listSessions();
  const list = el<HTMLUListElement>('session-list');
  list.replaceChildren();
  for (const summary of sessions) {
    const item = document.createElement('li');
    const button = document.createElement('button');
    button.textContent =
      `${summary['session-id']} — ${summary['device-name']} ` +
      `[${summary.state}${summary.result ? `: ${summary.result}` : ''}]`;
    button.addEventListener('click', () => {
      void openSession(summary['session-id']);
    });
    item.append(button);
    list.append(item);
  }
  el<HTMLParagraphElement>('session-list-empty').hidden = sessions.length > 0;
}

async function createSessionFromForm(event: Event): Promise<void> {
  event.preventDefault();
  const pick = (id: string): Blob => {
    const input = el<HTMLInputElement>(id);
    const file = input.files?.[0];
    if (!file) {
      throw new Error(`choose a ${id.replace('file-', '')} document`);
    }
    return file;
  };
  try {
    const sessionId = await api.createSession({
      device: pick('file-device'),
      profile: pick('file-profile'),
      catalog: pick('file-catalog'),
      plan: pick('file-plan'),
    });
    notice(`created session ${sessionId}`);
    await refreshSessionList();
    await openSession(sessionId);
  } catch (error) {
    notice(describeError(error), 'error');
  }
}

// ---------------------------------------------------------------------------
// session view

async function openSession(sessionId: string): Promise<void> {
  currentSessionId = sessionId;
  const summary = await api.getSession(sessionId);
  const plan = await api.getPlan(sessionId);
  viewState = new SessionViewState(plan);
  await reconcileFromServer(summary);
  el<HTMLElement>('session-view').hidden = false;
  el<HTMLHeadingElement>('session-title').textContent =
    `${summary['device-name']} — session ${sessionId}`;
  renderAll();
}

/** Full-state refetch: the recovery path after any stream interruption. */
async function reconcileFromServer(summary?: SessionSummary): Promise<void> {
  if (!currentSessionId || !viewState) {
    return;
  }
  const current = summary ?? (await api.getSession(currentSessionId));
  const { protocols } = await (async () => {
    const response = await fetch(
      `/api/v1/sessions/${currentSessionId}/protocols`,
    );
    if (!response.ok) {
      throw new ApiError(response.status, 'HTTP_ERROR', 'cannot list protocols');
    }
    return (await response.json()) as { protocols: ProtocolDocument[] };
  })();
  let report: ReportDocument | null = null;
  if (current.state === 'ASSESSED') {
    report = await api.getReport(currentSessionId);
  }
  viewState.reconcile(protocols, report);
  pendingQueue = await api.pendingManual(currentSessionId);
  renderAll();
}

function renderAll(): void {
  renderPlanTable();
  renderPendingQueue();
  renderVerdictPanel();
}

function renderPlanTable(): void {
  if (!viewState) {
    return;
  }
  const body = el<HTMLTableSectionElement>('plan-rows');
  body.replaceChildren();
  for (const row of viewState.rows) {
    const tr = document.createElement('tr');
    const chip = document.createElement('span');
    chip.className = `chip chip-${row.chip}`;
    chip.textContent = row.chip;
    const cells = [row.entryId, row.caseId, row.component, row.mode];
    for (const text of cells) {
      const td = document.createElement('td');
      td.textContent = text;
      tr.append(td);
    }
    const chipCell = document.createElement('td');
    chipCell.append(chip);
    tr.append(chipCell);
    const rationaleCell = document.createElement('td');
    rationaleCell.textContent = row.rationale;
    rationaleCell.className = 'rationale';
    tr.append(rationaleCell);
    body.append(tr);
  }
  el<HTMLParagraphElement>('empty-plan-warning').hidden = !viewState.emptyPlan;
}

async function runAutomated(): Promise<void> {
  if (!currentSessionId || !viewState || executing) {
    return;
  }
  executing = true;
  notice('executing automated entries…');
  viewState.markAutomatedRunning();
  renderPlanTable();
  try {
    await api.executeAutomated(currentSessionId, (event) => {
      if (event.event === 'protocol' && viewState) {
        viewState.applyProtocol(JSON.parse(event.data) as ProtocolDocument);
        renderPlanTable();
      } else if (event.event === 'error') {
        notice(`execution error: ${event.data}`, 'error');
      }
    });
    notice('automated execution finished');
    await reconcileFromServer();
  } catch (error) {
    // stream dropped or rejected: recover by refetching the full state
    notice(`${describeError(error)} — refetching state`, 'error');
    await reconcileFromServer();
  } finally {
    executing = false;
  }
}

// ---------------------------------------------------------------------------
// manual wizard

function renderPendingQueue(): void {
  const list = el<HTMLUListElement>('pending-list');
  list.replaceChildren();
  for (const entry of pendingQueue) {
    const item = document.createElement('li');
    const button = document.createElement('button');
    button.textContent =
      `${entry['plan-entry-id']} — ${entry['case-title']} ` +
      `[${entry.severity}, ${entry['execution-mode']}]`;
    button.addEventListener('click', () => startWizard(entry));
    item.append(button);
    list.append(item);
  }
  el<HTMLParagraphElement>('pending-empty').hidden = pendingQueue.length > 0;
}

function startWizard(entry: PendingEntry): void {
  wizard = new ManualWizard(entry);
  el<HTMLElement>('wizard').hidden = false;
  el<HTMLHeadingElement>('wizard-title').textContent =
    `${entry['plan-entry-id']}: ${entry['case-title']}`;
  renderWizard();
}

function closeWizard(): void {
  wizard = null;
  el<HTMLElement>('wizard').hidden = true;
}

function renderWizard(): void {
  if (!wizard) {
    return;
  }
  const steps = el<HTMLOListElement>('wizard-steps');
  steps.replaceChildren();
  wizard.steps.forEach((text, index) => {
    const item = document.createElement('li');
    const state =
      index < wizard!.currentStep ? 'done'
      : index === wizard!.currentStep ? 'active'
      : 'locked';
    item.className = `wizard-step ${state}`;
    const label = document.createElement('p');
    label.textContent = text;
    item.append(label);
    if (state === 'done') {
      const recorded = document.createElement('p');
      recorded.className = 'observation';
      const observation = wizard!.observationFor(index);
      recorded.textContent = observation ? `observed: ${observation}` : 'no observation';
      item.append(recorded);
    }
    if (state === 'active') {
      const input = document.createElement('textarea');
      input.id = 'wizard-observation';
      input.placeholder = 'observation (optional)';
      input.value = wizard!.observationFor(index);
      const confirm = document.createElement('button');
      confirm.textContent = `confirm step ${index + 1}`;
      confirm.addEventListener('click', () => {
        wizard!.recordObservation(index, input.value);
        wizard!.confirmStep(index);
        renderWizard();
      });
      item.append(input, confirm);
    }
    steps.append(item);
  });

  const outcomeBox = el<HTMLDivElement>('wizard-outcome');
  outcomeBox.hidden = !wizard.allStepsConfirmed;
  if (wizard.allStepsConfirmed) {
    const select = el<HTMLSelectElement>('wizard-outcome-select');
    if (!select.options.length) {
      for (const outcome of OUTCOMES) {
        const option = document.createElement('option');
        option.value = outcome;
        option.textContent = outcome;
        select.append(option);
      }
    }
  }
  updateSubmitState();
}

function updateSubmitState(): void {
  if (!wizard) {
    return;
  }
  const submit = el<HTMLButtonElement>('wizard-submit');
  const blocked = wizard.blockedReason();
  submit.disabled = blocked !== null;
  el<HTMLParagraphElement>('wizard-blocked').textContent = blocked ?? '';
}

async function submitWizard(): Promise<void> {
  if (!wizard || !currentSessionId) {
    return;
  }
  const entryId = wizard.entry['plan-entry-id'];
  try {
    const submission = wizard.buildSubmission(
      el<HTMLInputElement>('assessor-id').value || 'console-assessor',
    );
    const protocol = await api.submitManualResult(currentSessionId, submission);
    viewState?.applyProtocol(protocol);
    pendingQueue = pendingQueue.filter((e) => e['plan-entry-id'] !== entryId);
    notice(`recorded ${entryId}: ${protocol.outcome}`);
    closeWizard();
    renderAll();
  } catch (error) {
    if (error instanceof ApiError && error.status === 409) {
      // someone else (another tab) recorded this entry first
      pendingQueue = pendingQueue.filter((e) => e['plan-entry-id'] !== entryId);
      notice(
        `conflict: ${entryId} was already recorded elsewhere; entry removed from queue`,
        'error',
      );
      closeWizard();
      await reconcileFromServer();
    } else {
      notice(describeError(error), 'error');
    }
  }
}

// ---------------------------------------------------------------------------
// verdict panel

function renderVerdictPanel(): void {
  const panel = el<HTMLElement>('verdict-panel');
  const report = viewState?.report ?? null;
  if (!report) {
    panel.hidden = true;
    return;
  }
  panel.hidden = false;
  const badge = el<HTMLSpanElement>('verdict-result');
  badge.textContent = report.result;
  badge.className = `verdict ${report.result === 'SECURE' ? 'secure' : 'insecure'}`;
  const rules = el<HTMLUListElement>('verdict-rules');
  rules.replaceChildren();
  for (const rule of report['triggered-rules']) {
    const item = document.createElement('li');
    item.textContent = `${rule.rule}: ${rule.detail}`;
    rules.append(item);
  }
  el<HTMLParagraphElement>('verdict-empty-plan').hidden = !report['empty-plan'];
  const failing = report.verdicts.filter(
    (verdict) => verdict['effective-outcome'] === 'FAIL',
  );
  el<HTMLParagraphElement>('verdict-summary').textContent =
    `${failing.length} failed case(s) of ${report.verdicts.length} ` +
    `(scheme ${report['scheme-id']})`;
}

async function assessSession(): Promise<void> {
  if (!currentSessionId || !viewState) {
    return;
  }
  const schemeId = el<HTMLInputElement>('scheme-id').value.trim();
  if (!schemeId) {
    notice('enter a scheme id', 'error');
    return;
  }
  try {
    const report = await api.assess(currentSessionId, schemeId);
    viewState.report = report;
    notice(`assessment complete: ${report.result}`);
    renderAll();
  } catch (error) {
    notice(describeError(error), 'error');
  }
}

// ---------------------------------------------------------------------------

export function mount(): void {
  el<HTMLFormElement>('create-form').addEventListener('submit', (event) => {
    void createSessionFromForm(event);
  });
  el<HTMLButtonElement>('run-automated').addEventListener('click', () => {
    void runAutomated();
  });
  el<HTMLButtonElement>('assess-button').addEventListener('click', () => {
    void assessSession();
  });
  el<HTMLButtonElement>('wizard-submit').addEventListener('click', () => {
    void submitWizard();
  });
  el<HTMLButtonElement>('wizard-cancel').addEventListener('click', closeWizard);
  el<HTMLSelectElement>('wizard-outcome-select').addEventListener('change', (event) => {
    wizard?.setOutcome((event.target as HTMLSelectElement).value as Outcome);
    updateSubmitState();
  });
  el<HTMLTextAreaElement>('wizard-rationale').addEventListener('input', (event) => {
    if (wizard) {
      wizard.rationale = (event.target as HTMLTextAreaElement).value;
      updateSubmitState();
    }
  });
  void refreshSessionList();
}

if (typeof document !== 'undefined' && document.getElementById('session-list')) {
  mount();
}
