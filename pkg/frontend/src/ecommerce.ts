/**
 * Reader for the e-commerce review releases (Men's T-shirt, Television).
 *
 * Those datasets ship as plain text in three-line records: the sentence
 * with the aspect replaced by the placeholder $T$, the aspect term, and a
 * numeric polarity (1 positive, 0 neutral, -1 negative).  The placeholder
 * is substituted back so downstream sequence assembly sees the real
 * sentence.
 */

import { readFileSync } from 'node:fs';

import { ParseError, Polarity, RawExample, Split } from './types.js';

const POLARITY_CODES: Record<string, Polarity> = {
  '1': 'positive',
  '0': 'neutral',
  '-1': 'negative',
};

export function parseEcommerceText(text: string, split: Split, source = '<string>'): RawExample[] {
  const lines = text.split(/\r?\n/);
  while (lines.length && lines[lines.length - 1].trim() === '') {
    lines.pop();
  }
  if (lines.length % 3 !== 0) {
    throw new ParseError(
      `${source}: expected records of 3 lines (sentence with $T$, aspect, ` +
      `polarity), got ${lines.length} lines`);
  }

  const examples: RawExample[] = [];
  for (let i = 0; i < lines.length; i += 3) {
    const template = lines[i].trim();
    const aspect = lines[i + 1].trim();
    const code = lines[i + 2].trim();
    const polarity = POLARITY_CODES[code];
    if (polarity === undefined) {
      throw new ParseError(
        `${source}:${i + 3}: polarity must be one of -1/0/1, got ${JSON.stringify(code)}`);
    }
    if (!template.includes('$T$')) {
      throw new ParseError(`${source}:${i + 1}: sentence is missing the $T$ placeholder`);
    }
    examples.push({
      sentence: template.replace('$T$', aspect),
      aspect,
      polarity,
      split,
    });
  }
  return examples;
}

export function parseEcommerceFile(path: string, split: Split): RawExample[] {
  return parseEcommerceText(readFileSync(path, 'utf-8'), split, path);
}
