/**
 * Guided manual test flow: a strictly sequential step wizard.
 *
 * Step k+1 cannot be recorded before step k is confirmed, the final outcome
 * is one of PASS/FAIL/INCONCLUSIVE/SKIPPED, and a rationale is mandatory for
 * every non-PASS outcome. The wizard only assembles the submission; the
 * server response stays authoritative.
 */

import type { ManualSubmission, Outcome, PendingEntry } from './types.js';

export const OUTCOMES: Outcome[] = ['PASS', 'FAIL', 'INCONCLUSIVE', 'SKIPPED'];

export class ManualWizard {
  readonly steps: string[];
  private observations: string[];
  private confirmed: boolean[];
  outcome: Outcome | null = null;
  rationale = '';

  constructor(readonly entry: PendingEntry) {
    this.steps = [...entry['instantiated-guide']];
    this.observations = this.steps.map(() => '');
    this.confirmed = this.steps.map(() => false);
  }

  /** Index of the first unconfirmed step; steps.length when all are done. */
  get currentStep(): number {
    const index = this.confirmed.indexOf(false);
    return index < 0 ? this.steps.length : index;
  }

  get allStepsConfirmed(): boolean {
    return this.currentStep === this.steps.length;
  }

  observationFor(step: number): string {
    return this.observations[step] ?? '';
  }

  /** Record the observation text for the current step only. */
  recordObservation(step: number, text: string): void {
    if (step !== this.currentStep) {
      throw new Error(
        `step ${step + 1} cannot be recorded before step ${this.currentStep + 1}`,
      );
    }
    this.observations[step] = text;
  }

  /** Confirm the current step and move on. */
  confirmStep(step: number): void {
    if (step !== this.currentStep) {
      throw new Error(
        `step ${step + 1} cannot be confirmed before step ${this.currentStep + 1}`,
      );
    }
    this.confirmed[step] = true;
  }

  setOutcome(outcome: Outcome): void {
    if (!OUTCOMES.includes(outcome)) {
      throw new Error(`invalid outcome ${outcome}`);
    }
    this.outcome = outcome;
  }

  /** Why submission is blocked, or null when it may proceed. */
  blockedReason(): string | null {
    if (!this.allStepsConfirmed) {
      return `confirm step ${this.currentStep + 1} of ${this.steps.length} first`;
    }
    if (this.outcome === null) {
      return 'select an outcome';
    }
    if (this.outcome !== 'PASS' && this.rationale.trim() === '') {
      return 'a rationale is required for non-PASS outcomes';
    }
    return null;
  }

  get canSubmit(): boolean {
    return this.blockedReason() === null;
  }

  buildSubmission(assessorId: string): ManualSubmission {
    const blocked = this.blockedReason();
    if (blocked) {
      throw new Error(blocked);
    }
    return {
      'plan-entry-id': this.entry['plan-entry-id'],
      'assessor-id': assessorId,
      'step-observations': this.observations.map((text) =>
        text.trim() === '' ? [] : [text],
      ),
      outcome: this.outcome as Outcome,
      rationale: this.rationale,
    };
  }
}
