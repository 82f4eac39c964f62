#!/usr/bin/env node
/**
 * stgnn-export export --input <raw> --format {semeval_xml|ecommerce}
 *                     --split {train|test} --encoder <name> --out <dir>
 *                     [--name <dataset>] [--seed <n>] [--max-len <n>]
 *
 * --encoder is "hash", "hash:<width>", or a local pretrained-model
 * directory.  Exit codes: 0 ok, 1 internal failure, 2 bad input.
 */

import { makeEncoder } from './encoder.js';
import { parseEcommerceFile } from './ecommerce.js';
import { exportExamples } from './export.js';
import { parseSemevalFile } from './semeval.js';
import { EncoderError, ParseError, RawExample, Split } from './types.js';

interface Flags {
  [key: string]: string;
}

function parseFlags(argv: string[]): Flags {
  const flags: Flags = {};
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    if (!key.startsWith('--') || i + 1 >= argv.length) {
      throw new ParseError(`malformed arguments near ${JSON.stringify(key)}`);
    }
    flags[key.slice(2)] = argv[i + 1];
  }
  return flags;
}

function required(flags: Flags, name: string): string {
  const value = flags[name];
  if (value === undefined) throw new ParseError(`missing required flag --${name}`);
  return value;
}

export async function run(argv: string[]): Promise<number> {
  if (argv[0] !== 'export') {
    console.error('usage: stgnn-export export --input <file> --format ' +
      '{semeval_xml|ecommerce} --split {train|test} --encoder <name> --out <dir>');
    return 2;
  }
  const flags = parseFlags(argv.slice(1));
  const input = required(flags, 'input');
  const format = required(flags, 'format');
  const split = required(flags, 'split') as Split;
  const out = required(flags, 'out');
  const encoderSpec = flags['encoder'] ?? 'hash';
  const seed = Number(flags['seed'] ?? '0');
  const maxLen = Number(flags['max-len'] ?? '128');

  if (split !== 'train' && split !== 'test') {
    throw new ParseError(`--split must be train or test, got ${split}`);
  }

  let examples: RawExample[];
  if (format === 'semeval_xml') {
    examples = parseSemevalFile(input, split);
  } else if (format === 'ecommerce') {
    examples = parseEcommerceFile(input, split);
  } else {
    throw new ParseError(`--format must be semeval_xml or ecommerce, got ${format}`);
  }

  const encoder = makeEncoder(encoderSpec, seed, maxLen);
  const result = await exportExamples(examples, encoder, {
    name: flags['name'] ?? `${format}-${split}`,
    outDir: out,
    onTruncate: (id) => console.error(`truncated sentence tokens for ${id}`),
  });
  console.log(`exported ${result.count} examples (width ${encoder.width}) ` +
    `to ${result.manifestPath}`);
  if (result.truncatedIds.length) {
    console.log(`truncated ${result.truncatedIds.length} sentences`);
  }
  return 0;
}

const invokedDirectly = process.argv[1]?.endsWith('cli.js');
if (invokedDirectly) {
  run(process.argv.slice(2))
    .then((code) => process.exit(code))
    .catch((err) => {
      if (err instanceof ParseError || err instanceof EncoderError
        || (err as NodeJS.ErrnoException).code === 'ENOENT') {
        console.error(`error: ${err.message}`);
        process.exit(2);
      }
      console.error(`internal error: ${err}`);
      process.exit(1);
    });
}
