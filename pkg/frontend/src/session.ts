/** Annotation session state: a working copy of the exam metadata with dirty
 *  tracking, client-side validation mirroring the server's invariants, ROI
 *  editing, and the review/override loop.
 *
 *  Grades and classifications are server-authoritative: this module stores
 *  service responses verbatim and never computes a grade locally. */

import type { ApiClient } from './api.js';
import type {
  ExamMetadata,
  QuestionMetadata,
  Rect,
  ReviewItem,
  SheetGradePayload,
} from './types.js';
import { rectsOverlap } from './canvas.js';

export interface Selection {
  question: number;
  choice: number;
}

export interface DrawResult {
  added: boolean;
  /** Same-question boxes the new one overlaps (legal, but worth a badge). */
  overlaps: number[];
  reason?: string;
}

function cloneMetadata(metadata: ExamMetadata): ExamMetadata {
  return JSON.parse(JSON.stringify(metadata)) as ExamMetadata;
}

/** Client-side mirror of the server's metadata invariants, so problems are
 *  reported next to the offending field before a PUT is attempted. */
export function validateMetadata(metadata: ExamMetadata): string[] {
  const problems: string[] = [];
  if (metadata.examNumberOfPages < 1) {
    problems.push('examNumberOfPages: must be >= 1');
  }
  if (metadata.totalNumberOfQuestions !== metadata.questions.length) {
    problems.push('totalNumberOfQuestions: disagrees with the question list');
  }
  const seen = new Set<string>();
  for (const q of metadata.questions) {
    const where = `question ${q.questionIndex}`;
    if (q.questionRect.length < 2) {
      problems.push(`${where}: needs at least 2 choice boxes`);
    }
    if (q.questionChoices !== q.questionRect.length) {
      problems.push(`${where}: questionChoices disagrees with questionRect`);
    }
    if (q.questionAnswer < 0 || q.questionAnswer >= q.questionRect.length) {
      problems.push(`${where}: questionAnswer out of range`);
    }
    if (q.questionWeight <= 0) {
      problems.push(`${where}: questionWeight must be > 0`);
    }
    if (q.pageNumber < 0 || q.pageNumber >= metadata.examNumberOfPages) {
      problems.push(`${where}: pageNumber out of range`);
    }
    q.questionRect.forEach((_, choice) => {
      const key = `${q.questionIndex}:${choice}`;
      if (seen.has(key)) {
        problems.push(`${where}: duplicate choice ${choice}`);
      }
      seen.add(key);
    });
  }
  return problems;
}

export class AnnotationSession {
  private saved: ExamMetadata;
  private working: ExamMetadata;
  private dirtyFlag = false;
  selection: Selection = { question: 0, choice: 0 };

  /** Server-provided grades by sheet name; values are stored verbatim. */
  readonly grades = new Map<string, SheetGradePayload>();
  private queue: ReviewItem[] = [];
  private queueCursor = 0;

  constructor(
    private readonly api: ApiClient,
    metadata: ExamMetadata,
  ) {
    this.saved = cloneMetadata(metadata);
    this.working = cloneMetadata(metadata);
  }

  static async load(api: ApiClient): Promise<AnnotationSession> {
    return new AnnotationSession(api, await api.getMetadata());
  }

  get metadata(): ExamMetadata {
    return this.working;
  }

  get dirty(): boolean {
    return this.dirtyFlag;
  }

  validate(): string[] {
    return validateMetadata(this.working);
  }

  // -- metadata editing ------------------------------------------------------

  private markDirty(): void {
    this.dirtyFlag = true;
  }

  private question(index: number): QuestionMetadata {
    const q = this.working.questions.find((x) => x.questionIndex === index);
    if (!q) {
      throw new Error(`question ${index} is not in the working metadata`);
    }
    return q;
  }

  addQuestion(): QuestionMetadata {
    const index = this.working.questions.length;
    const q: QuestionMetadata = {
      questionIndex: index,
      pageNumber: 0,
      questionWeight: 1,
      questionAnswer: 0,
      questionChoices: 0,
      questionRect: [],
    };
    this.working.questions.push(q);
    this.working.totalNumberOfQuestions = this.working.questions.length;
    this.markDirty();
    return q;
  }

  /** Add a drawn rectangle as the next choice box of `questionIndex`.
   *  A null rect (zero-area drag) is rejected; overlap with existing boxes
   *  of the same question is legal but reported for a warning badge. */
  drawRoi(questionIndex: number, rect: Rect | null): DrawResult {
    if (rect === null) {
      return { added: false, overlaps: [], reason: 'zero-area drag' };
    }
    const q = this.question(questionIndex);
    const overlaps = q.questionRect
      .map((other, choice) => (rectsOverlap(rect, other) ? choice : -1))
      .filter((c) => c >= 0);
    q.questionRect.push(rect);
    q.questionChoices = q.questionRect.length;
    this.selection = { question: questionIndex, choice: q.questionRect.length - 1 };
    this.markDirty();
    return { added: true, overlaps };
  }

  removeRoi(questionIndex: number, choice: number): void {
    const q = this.question(questionIndex);
    if (choice < 0 || choice >= q.questionRect.length) {
      throw new Error(`choice ${choice} is not in question ${questionIndex}`);
    }
    q.questionRect.splice(choice, 1);
    q.questionChoices = q.questionRect.length;
    if (q.questionAnswer >= q.questionRect.length) {
      q.questionAnswer = Math.max(q.questionRect.length - 1, 0);
    }
    this.markDirty();
  }

  setAnswer(questionIndex: number, choice: number): void {
    this.question(questionIndex).questionAnswer = choice;
    this.markDirty();
  }

  setWeight(questionIndex: number, weight: number): void {
    this.question(questionIndex).questionWeight = weight;
    this.markDirty();
  }

  /** PUT the working copy. Refuses to send metadata violating the
   *  invariants; on success the saved baseline becomes the server's copy. */
  async save(): Promise<void> {
    const problems = this.validate();
    if (problems.length > 0) {
      throw new Error(`metadata invalid: ${problems.join('; ')}`);
    }
    const stored = await this.api.putMetadata(this.working);
    this.saved = cloneMetadata(stored);
    this.working = cloneMetadata(stored);
    this.dirtyFlag = false;
  }

  /** Explicitly drop unsaved edits and return to the saved baseline. */
  discard(): void {
    this.working = cloneMetadata(this.saved);
    this.dirtyFlag = false;
  }

  // -- grading and review ----------------------------------------------------

  async grade(strategy: string, sheets?: string[]): Promise<void> {
    if (this.dirtyFlag) {
      throw new Error('unsaved metadata changes; save or discard before grading');
    }
    const result = await this.api.grade(strategy, sheets);
    for (const sheet of result.sheets) {
      this.grades.set(sheet.sheet, sheet);
    }
    await this.refreshReviewQueue();
  }

  /** The number the UI shows for a sheet: always the server's rendering. */
  displayedTotal(sheet: string): string {
    const grade = this.grades.get(sheet);
    if (!grade) {
      throw new Error(`sheet ${sheet} has no grade yet`);
    }
    return grade.display_total;
  }

  async refreshReviewQueue(): Promise<void> {
    this.queue = await this.api.reviewQueue();
    this.queueCursor = Math.min(this.queueCursor, Math.max(this.queue.length - 1, 0));
  }

  get reviewQueue(): readonly ReviewItem[] {
    return this.queue;
  }

  currentReviewItem(): ReviewItem | null {
    return this.queue.length > 0 ? this.queue[this.queueCursor] : null;
  }

  nextReviewItem(): ReviewItem | null {
    if (this.queue.length === 0) {
      return null;
    }
    this.queueCursor = (this.queueCursor + 1) % this.queue.length;
    return this.queue[this.queueCursor];
  }

  /** Override one box label and store the server-recomputed grade. */
  async overrideBox(
    sheet: string,
    question: number,
    choice: number,
    label: number,
  ): Promise<SheetGradePayload> {
    const updated = await this.api.override(sheet, question, choice, label);
    this.grades.set(sheet, updated);
    await this.refreshReviewQueue();
    return updated;
  }
}
