/**
 * Session view state: one status chip per plan entry.
 *
 * Derived solely from API responses and SSE events; rows keep the plan's
 * canonical order no matter when events arrive, and a full refetch
 * (reconcile) always wins over locally accumulated stream state.
 */

import type { PlanDocument, ProtocolDocument, ReportDocument } from './types.js';

export type Chip =
  | 'pending'
  | 'running'
  | 'pass'
  | 'fail'
  | 'inconclusive'
  | 'skipped'
  | 'error';

export interface EntryRow {
  entryId: string;
  caseId: string;
  component: string;
  mode: string;
  chip: Chip;
  rationale: string;
}

export function chipForOutcome(outcome: string): Chip {
  switch (outcome) {
    case 'PASS':
      return 'pass';
    case 'FAIL':
      return 'fail';
    case 'INCONCLUSIVE':
      return 'inconclusive';
    case 'SKIPPED':
      return 'skipped';
    case 'ERROR':
      return 'error';
    default:
      return 'pending';
  }
}

export class SessionViewState {
  readonly rows: EntryRow[] = [];
  private readonly byEntryId = new Map<string, EntryRow>();
  report: ReportDocument | null = null;

  constructor(plan: PlanDocument) {
    for (const entry of plan.entries) {
      const row: EntryRow = {
        entryId: entry['plan-entry-id'],
        caseId: entry['case-id'],
        component: entry['target-component-id'],
        mode: entry['execution-mode'],
        chip: 'pending',
        rationale: '',
      };
      this.rows.push(row);
      this.byEntryId.set(row.entryId, row);
    }
  }

  get emptyPlan(): boolean {
    return this.rows.length === 0;
  }

  markRunning(entryId: string): void {
    const row = this.byEntryId.get(entryId);
    if (row && row.chip === 'pending') {
      row.chip = 'running';
    }
  }

  markAutomatedRunning(): void {
    for (const row of this.rows) {
      if (row.mode === 'AUTOMATED' && row.chip === 'pending') {
        row.chip = 'running';
      }
    }
  }

  /** Apply one streamed or fetched protocol to its row. */
  applyProtocol(protocol: ProtocolDocument): void {
    const row = this.byEntryId.get(protocol['plan-entry-id']);
    if (!row) {
      return; // stale event for a different plan; a refetch will reconcile
    }
    row.chip = chipForOutcome(protocol.outcome);
    row.rationale = protocol['outcome-rationale'];
  }

  /** Replace stream-derived state with the server's authoritative view. */
  reconcile(protocols: ProtocolDocument[], report: ReportDocument | null): void {
    for (const row of this.rows) {
      row.chip = 'pending';
      row.rationale = '';
    }
    for (const protocol of protocols) {
      this.applyProtocol(protocol);
    }
    this.report = report;
  }

  counts(): Record<Chip, number> {
    const counts: Record<Chip, number> = {
      pending: 0, running: 0, pass: 0, fail: 0,
      inconclusive: 0, skipped: 0, error: 0,
    };
    for (const row of this.rows) {
      counts[row.chip] += 1;
    }
    return counts;
  }

  pendingManualIds(): string[] {
    return this.rows
      .filter((row) => row.mode !== 'AUTOMATED' && row.chip === 'pending')
      .map((row) => row.entryId);
  }
}
