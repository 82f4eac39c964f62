/**
 * SemEval-2014 task-4 XML reader.
 *
 * One RawExample per <aspectTerm> annotation; "conflict" polarities are
 * dropped because the classifier is three-way.  Sentences without aspect
 * terms contribute nothing.
 */

import { readFileSync } from 'node:fs';
import { XMLParser, XMLValidator } from 'fast-xml-parser';

import { ParseError, Polarity, RawExample, Split } from './types.js';

interface AspectTermNode {
  term?: string;
  polarity?: string;
}

interface SentenceNode {
  text?: string | number;
  aspectTerms?: { aspectTerm?: AspectTermNode | AspectTermNode[] };
}

function asArray<T>(value: T | T[] | undefined): T[] {
  if (value === undefined) return [];
  return Array.isArray(value) ? value : [value];
}

export function parseSemevalXml(xml: string, split: Split, source = '<string>'): RawExample[] {
  const valid = XMLValidator.validate(xml);
  if (valid !== true) {
    const { line, col, msg } = valid.err;
    throw new ParseError(`${source}:${line}:${col}: ${msg}`);
  }
  const parser = new XMLParser({
    ignoreAttributes: false,
    attributeNamePrefix: '',
    // keep "2339"-style ids and bare text nodes as strings
    parseTagValue: false,
    parseAttributeValue: false,
  });
  const doc = parser.parse(xml);
  const sentences = asArray<SentenceNode>(doc?.sentences?.sentence);

  const examples: RawExample[] = [];
  for (const sentence of sentences) {
    const text = sentence.text === undefined ? '' : String(sentence.text);
    for (const term of asArray(sentence.aspectTerms?.aspectTerm)) {
      const polarity = term.polarity;
      if (polarity === 'conflict') continue;
      if (polarity !== 'positive' && polarity !== 'neutral' && polarity !== 'negative') {
        throw new ParseError(
          `${source}: unknown polarity ${JSON.stringify(polarity)} on term ` +
          `${JSON.stringify(term.term)}`);
      }
      examples.push({
        sentence: text,
        aspect: term.term ?? '',
        polarity: polarity as Polarity,
        split,
      });
    }
  }
  return examples;
}

export function parseSemevalFile(path: string, split: Split): RawExample[] {
  return parseSemevalXml(readFileSync(path, 'utf-8'), split, path);
}
