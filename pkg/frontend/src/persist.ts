// Subject form persistence across page reloads.

export interface SubjectForm {
  subject_id: number;
  day_id: number;
  n_blocks: number;
  n_trials: number;
  wearing_shift: number;
}

export const DEFAULT_FORM: SubjectForm = {
  subject_id: 1,
  day_id: 1,
  n_blocks: 12,
  n_trials: 12,
  wearing_shift: 0,
};

const KEY = 'semglab.subject-form';

interface StorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
}

export function loadForm(storage: StorageLike = localStorage): SubjectForm {
  try {
    const raw = storage.getItem(KEY);
    if (!raw) return { ...DEFAULT_FORM };
    return { ...DEFAULT_FORM, ...JSON.parse(raw) };
  } catch {
    return { ...DEFAULT_FORM };
  }
}

export function saveForm(form: SubjectForm, storage: StorageLike = localStorage): void {
  storage.setItem(KEY, JSON.stringify(form));
}
