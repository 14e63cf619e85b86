/** Shared wire types for the /v1 grading service. */

/** [x, y, width, height] in reference-image pixels. */
export type Rect = [number, number, number, number];

export interface QuestionMetadata {
  questionIndex: number;
  pageNumber: number;
  questionWeight: number;
  questionAnswer: number;
  questionChoices: number;
  questionRect: Rect[];
}

export interface ExamMetadata {
  examId: string;
  examNumberOfPages: number;
  totalNumberOfQuestions: number;
  isThereAStudentId: boolean;
  studentIdRect: Rect | null;
  questions: QuestionMetadata[];
}

/** Answer-box class codes used by the service (1/2/3). */
export const CONFIRMED = 1;
export const CROSSED_OUT = 2;
export const EMPTY = 3;
export type AnswerClass = typeof CONFIRMED | typeof CROSSED_OUT | typeof EMPTY;

export const CLASS_LABELS: Record<AnswerClass, string> = {
  [CONFIRMED]: 'confirmed',
  [CROSSED_OUT]: 'crossed out',
  [EMPTY]: 'empty',
};

export interface QuestionResult {
  question_index: number;
  choice_classes: number[];
  choice_confidences: number[];
  selected_choice: number | null;
  confirmed_count: number;
  awarded: number;
  flagged_for_review: boolean;
}

export interface SheetGradePayload {
  sheet: string;
  sheet_id: string;
  total: number;
  display_total: string;
  questions: QuestionResult[];
}

export interface GradeRunResult {
  sheets: SheetGradePayload[];
  failures: { sheet: string; error: string }[];
}

export interface GradeProgress {
  state: 'idle' | 'running' | 'done';
  completed: number;
  total: number;
}

export interface ReviewItem extends QuestionResult {
  sheet: string;
}

export interface ClassifyPreview {
  scores: Record<string, number>;
  predicted: number;
  confidence: number;
}

export interface ServiceError {
  error: string;
  message: string;
}
