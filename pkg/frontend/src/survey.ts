/**
 * End-of-session survey model.
 *
 * One row per played piece with three 1-9 scales, plus two 1-10 session
 * scales.  Drafts hold null for unanswered questions; the UI widgets are
 * bounded, and `clampScale` backstops them so an out-of-bounds value can
 * never reach a draft.  `validateDraft` mirrors the server's checks so a
 * complete draft is accepted by construction.
 */

import type { SurveyPayload } from "./wire";

export interface Scale {
  min: number;
  max: number;
}

export const PIECE_SCALE: Scale = { min: 1, max: 9 };
export const SESSION_SCALE: Scale = { min: 1, max: 10 };

export const PIECE_QUESTIONS = ["relax", "concentrate", "like"] as const;
export type PieceQuestion = (typeof PIECE_QUESTIONS)[number];

export const SESSION_QUESTIONS = ["volumeRating", "transitionComfort"] as const;
export type SessionQuestion = (typeof SESSION_QUESTIONS)[number];

export interface PieceDraft {
  segmentIndex: number;
  relax: number | null;
  concentrate: number | null;
  like: number | null;
}

export interface SurveyDraft {
  perPiece: PieceDraft[];
  volumeRating: number | null;
  transitionComfort: number | null;
}

export function emptyDraft(segmentCount: number): SurveyDraft {
  return {
    perPiece: Array.from({ length: segmentCount }, (_, i) => ({
      segmentIndex: i,
      relax: null,
      concentrate: null,
      like: null,
    })),
    volumeRating: null,
    transitionComfort: null,
  };
}

/** Clamp to the scale and drop fractions; null stays null (unanswered). */
export function clampScale(value: number | null, scale: Scale): number | null {
  if (value === null || Number.isNaN(value)) return null;
  return Math.min(scale.max, Math.max(scale.min, Math.round(value)));
}

export function setPieceRating(
  draft: SurveyDraft,
  segmentIndex: number,
  question: PieceQuestion,
  value: number | null,
): SurveyDraft {
  return {
    ...draft,
    perPiece: draft.perPiece.map((piece) =>
      piece.segmentIndex === segmentIndex
        ? { ...piece, [question]: clampScale(value, PIECE_SCALE) }
        : piece,
    ),
  };
}

export function setSessionRating(
  draft: SurveyDraft,
  question: SessionQuestion,
  value: number | null,
): SurveyDraft {
  return { ...draft, [question]: clampScale(value, SESSION_SCALE) };
}

export function isComplete(draft: SurveyDraft): boolean {
  return validateDraft(draft).length === 0;
}

/** Client-side mirror of the server's survey validation. */
export function validateDraft(draft: SurveyDraft): string[] {
  const violations: string[] = [];
  draft.perPiece.forEach((piece, i) => {
    for (const question of PIECE_QUESTIONS) {
      const value = piece[question];
      if (value === null) {
        violations.push(`piece ${i + 1}: ${question} is unanswered`);
      } else if (value < PIECE_SCALE.min || value > PIECE_SCALE.max) {
        violations.push(
          `piece ${i + 1}: ${question} out of range ${PIECE_SCALE.min}-${PIECE_SCALE.max}`,
        );
      }
    }
  });
  const session: [string, number | null][] = [
    ["volume", draft.volumeRating],
    ["transition comfort", draft.transitionComfort],
  ];
  for (const [label, value] of session) {
    if (value === null) {
      violations.push(`${label} is unanswered`);
    } else if (value < SESSION_SCALE.min || value > SESSION_SCALE.max) {
      violations.push(`${label} out of range ${SESSION_SCALE.min}-${SESSION_SCALE.max}`);
    }
  }
  return violations;
}

/** Wire payload for a complete draft; throws when questions are unanswered. */
export function toPayload(draft: SurveyDraft): SurveyPayload {
  const violations = validateDraft(draft);
  if (violations.length > 0) {
    throw new Error(`survey draft is not submittable: ${violations.join("; ")}`);
  }
  return {
    per_piece: draft.perPiece.map((piece) => ({
      segment_index: piece.segmentIndex,
      relax: piece.relax as number,
      concentrate: piece.concentrate as number,
      like: piece.like as number,
    })),
    volume_rating: draft.volumeRating as number,
    transition_comfort: draft.transitionComfort as number,
  };
}
