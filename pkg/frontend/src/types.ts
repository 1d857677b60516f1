/** Shared API payload shapes and the five-level rating scale. */

export type Rating =
  | 'not_useful_at_all'
  | 'not_useful'
  | 'neutral'
  | 'useful'
  | 'very_useful';

/** Server-side training labels; must mirror the service's linear 0..1 mapping. */
export const RATING_LABELS: Record<Rating, number> = {
  not_useful_at_all: 0.0,
  not_useful: 0.25,
  neutral: 0.5,
  useful: 0.75,
  very_useful: 1.0,
};

export const RATING_ORDER: Rating[] = [
  'not_useful_at_all',
  'not_useful',
  'neutral',
  'useful',
  'very_useful',
];

export const RATING_TEXT: Record<Rating, string> = {
  not_useful_at_all: 'not useful at all',
  not_useful: 'not useful',
  neutral: 'neutral',
  useful: 'useful',
  very_useful: 'very useful',
};

/** Point color per rating; unrated points get the neutral gray. */
export const RATING_COLORS: Record<Rating, string> = {
  not_useful_at_all: '#c62828',
  not_useful: '#ef6c00',
  neutral: '#9e9e9e',
  useful: '#2e7d32',
  very_useful: '#1565c0',
};

export const UNRATED_COLOR = '#b0bec5';

export interface ScoreBreakdown {
  p_value: number;
  truthful: boolean;
  score_c: number;
  score_s: number;
  score_u: number;
  score_f: number;
  delta: number;
  gamma: number;
  tau: number;
}

export interface TestResult {
  statistic: number;
  p_value: number;
  method: string;
  exact: boolean;
}

export interface Insight {
  candidate_id: string;
  text: string;
  score_f: number;
  scores: ScoreBreakdown;
  test: TestResult;
  cluster: number | null;
  rating: Rating | null;
}

export interface FeedbackAck {
  candidate_id: string;
  rating: Rating;
  label: number;
  timestamp: string;
  duplicate: boolean;
}

export interface RetrainSummary {
  seeds: number;
  pseudo_labeled: number;
  final_mse: number | null;
  added: string[];
  removed: string[];
  selected: string[];
}

export interface PcaPoint {
  candidate_id: string;
  x: number;
  y: number;
  feedback_label?: Rating | null;
}

export interface PcaResponse {
  points: PcaPoint[];
  explained_variance: number[];
}

export interface Health {
  status: string;
  insights: number;
  truthful: number;
  feedback: number;
}
