/** Shapes of the /api/v1 payloads the console consumes. */

export interface SessionSummary {
  'session-id': string;
  state: 'PLANNED' | 'EXECUTING' | 'AWAITING_MANUAL' | 'ASSESSED';
  'device-id': string;
  'device-name': string;
  'profile-id': string;
  'catalog-id': string;
  'plan-id': string;
  entries: number;
  covered: number;
  'pending-manual': number;
  'all-covered': boolean;
  result: 'SECURE' | 'INSECURE' | null;
}

export interface PlanEntry {
  'plan-entry-id': string;
  'case-id': string;
  'target-component-id': string;
  'execution-mode': 'AUTOMATED' | 'SEMI_AUTOMATED' | 'MANUAL';
  'instantiated-guide': string[];
  'executor-ref'?: { capability: string; parameters: Record<string, unknown> };
}

export interface PlanDocument {
  kind: 'test-plan';
  'plan-id': string;
  'device-id': string;
  entries: PlanEntry[];
}

export interface PendingEntry {
  'plan-entry-id': string;
  'case-id': string;
  'case-title': string;
  severity: 'CRITICAL' | 'MAJOR' | 'MINOR';
  'execution-mode': 'SEMI_AUTOMATED' | 'MANUAL';
  'target-component-id': string;
  'instantiated-guide': string[];
}

export type Outcome = 'PASS' | 'FAIL' | 'INCONCLUSIVE' | 'SKIPPED';

export interface ProtocolDocument {
  kind: 'execution-protocol';
  'protocol-id': string;
  'plan-entry-id': string;
  'case-id': string;
  outcome: Outcome | 'ERROR';
  'outcome-rationale': string;
}

export interface TriggeredRule {
  rule: string;
  detail: string;
}

export interface ReportVerdict {
  'case-id': string;
  'plan-entry-id': string;
  'effective-outcome': 'PASS' | 'FAIL' | 'SKIPPED';
  severity: string;
  'protocol-id': string;
}

export interface ReportDocument {
  kind: 'assessment-report';
  'report-id': string;
  'plan-id': string;
  'scheme-id': string;
  result: 'SECURE' | 'INSECURE';
  'empty-plan': boolean;
  'triggered-rules': TriggeredRule[];
  counts: Record<string, Record<string, number>>;
  verdicts: ReportVerdict[];
  coverage: {
    empty: boolean;
    total: number;
    modes: Record<string, { count: number; fraction: string }>;
  };
}

export interface ApiErrorBody {
  status: number;
  code: string;
  message: string;
}

export interface ManualSubmission {
  'plan-entry-id': string;
  'assessor-id': string;
  'step-observations': string[][];
  outcome: Outcome;
  rationale: string;
}

export interface DoneEvent {
  executed: number;
  'pending-manual': number;
  state: string;
}
