export type Polarity = 'positive' | 'neutral' | 'negative';
export type Split = 'train' | 'test';

export const POLARITIES: Polarity[] = ['positive', 'neutral', 'negative'];

/** One review sentence / aspect-term annotation, before embedding. */
export interface RawExample {
  sentence: string;
  aspect: string;
  polarity: Polarity;
  split: Split;
}

/** Per split/label tallies in manifest order. */
export type Counts = Record<Split, Record<Polarity, number>>;

export function emptyCounts(): Counts {
  return {
    train: { positive: 0, neutral: 0, negative: 0 },
    test: { positive: 0, neutral: 0, negative: 0 },
  };
}

export function tally(examples: RawExample[]): Counts {
  const counts = emptyCounts();
  for (const ex of examples) {
    counts[ex.split][ex.polarity] += 1;
  }
  return counts;
}

export class ParseError extends Error {}
export class EncoderError extends Error {}
