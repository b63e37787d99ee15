/**
 * Byte-compatible re-implementation of the workbench's JSON writer
 * (sorted keys, two-space indent, trailing newline, ASCII-escaped strings,
 * and shortest round-trip float formatting with a `.0` marker on integral
 * floats). Saving a document from the studio must produce exactly the bytes
 * the service's own writer produces, so ETags and job caches line up.
 */

/** Marks a number that must be rendered as a float (`1.0`, not `1`). */
export class Float {
  constructor(readonly value: number) {
    if (!Number.isFinite(value)) {
      throw new Error(`non-finite float ${value} cannot be serialized`);
    }
  }
}

export type JsonTree =
  | null
  | boolean
  | number // integers only; wrap floats in Float
  | Float
  | string
  | JsonTree[]
  | { [key: string]: JsonTree };

/**
 * Shortest round-trip decimal form of a finite double, switching to
 * exponential notation outside [1e-4, 1e16) and always keeping a decimal
 * point or exponent so the value reads back as a float.
 */
export function floatRepr(x: number): string {
  if (!Number.isFinite(x)) {
    throw new Error(`non-finite float ${x} has no JSON form`);
  }
  if (x === 0) {
    return Object.is(x, -0) ? "-0.0" : "0.0";
  }
  const match = x.toExponential().match(/^(-?)(\d)(?:\.(\d+))?e([+-]\d+)$/);
  if (!match) {
    throw new Error(`unexpected exponential form for ${x}`);
  }
  const sign = match[1]!;
  const digits = match[2]! + (match[3] ?? "");
  const exp = Number(match[4]!);
  if (exp >= -4 && exp < 16) {
    if (exp >= digits.length - 1) {
      return `${sign}${digits}${"0".repeat(exp - (digits.length - 1))}.0`;
    }
    if (exp >= 0) {
      return `${sign}${digits.slice(0, exp + 1)}.${digits.slice(exp + 1)}`;
    }
    return `${sign}0.${"0".repeat(-exp - 1)}${digits}`;
  }
  const mantissa = match[3] ? `${match[2]}.${match[3]}` : match[2]!;
  const expStr = (exp < 0 ? "-" : "+") + String(Math.abs(exp)).padStart(2, "0");
  return `${sign}${mantissa}e${expStr}`;
}

const SHORT_ESCAPES: Record<string, string> = {
  '"': '\\"',
  "\\": "\\\\",
  "\b": "\\b",
  "\f": "\\f",
  "\n": "\\n",
  "\r": "\\r",
  "\t": "\\t",
};

function escapeString(s: string): string {
  let out = '"';
  for (let i = 0; i < s.length; i++) {
    const ch = s[i]!;
    const code = s.charCodeAt(i);
    const short = SHORT_ESCAPES[ch];
    if (short !== undefined) {
      out += short;
    } else if (code < 0x20 || code > 0x7e) {
      out += "\\u" + code.toString(16).padStart(4, "0");
    } else {
      out += ch;
    }
  }
  return out + '"';
}

function render(value: JsonTree, depth: number): string {
  const pad = "  ".repeat(depth);
  const inner = "  ".repeat(depth + 1);
  if (value === null) return "null";
  if (typeof value === "boolean") return value ? "true" : "false";
  if (value instanceof Float) return floatRepr(value.value);
  if (typeof value === "number") {
    if (!Number.isInteger(value)) {
      throw new Error(`bare non-integer ${value}; wrap floats in Float`);
    }
    return String(value);
  }
  if (typeof value === "string") return escapeString(value);
  if (Array.isArray(value)) {
    if (value.length === 0) return "[]";
    const items = value.map((v) => inner + render(v, depth + 1));
    return "[\n" + items.join(",\n") + "\n" + pad + "]";
  }
  const keys = Object.keys(value).sort();
  if (keys.length === 0) return "{}";
  const items = keys.map(
    (k) => `${inner}${escapeString(k)}: ${render(value[k]!, depth + 1)}`,
  );
  return "{\n" + items.join(",\n") + "\n" + pad + "}";
}

/** Serialize with sorted keys, indent 2, and a trailing newline. */
export function dumpSorted(tree: JsonTree): string {
  return render(tree, 0) + "\n";
}
