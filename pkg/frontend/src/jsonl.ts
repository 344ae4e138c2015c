// JSON serialization byte-compatible with the toolchain's transcripts
// (Python json.dumps with sort_keys=True): keys sorted, ", " and ": "
// separators, non-ASCII escaped as \uXXXX.
//
// Known limit: JavaScript renders integral floats without a decimal
// point and pads exponents differently, so transcripts that must match
// the CLI byte-for-byte should avoid values like 1.0 or 1e-7 in events;
// integers and ordinary decimals (37.975) agree exactly.

function encodeString(s: string): string {
  let out = '"';
  for (let i = 0; i < s.length; i++) {
    const code = s.charCodeAt(i);
    const ch = s[i];
    if (ch === '"') out += '\\"';
    else if (ch === "\\") out += "\\\\";
    else if (ch === "\b") out += "\\b";
    else if (ch === "\f") out += "\\f";
    else if (ch === "\n") out += "\\n";
    else if (ch === "\r") out += "\\r";
    else if (ch === "\t") out += "\\t";
    else if (code < 0x20 || code > 0x7e) {
      out += "\\u" + code.toString(16).padStart(4, "0");
    } else out += ch;
  }
  return out + '"';
}

export function pyJson(value: unknown): string {
  if (value === null || value === undefined) return "null";
  if (typeof value === "boolean") return value ? "true" : "false";
  if (typeof value === "number") return String(value);
  if (typeof value === "string") return encodeString(value);
  if (Array.isArray(value)) return "[" + value.map(pyJson).join(", ") + "]";
  const record = value as Record<string, unknown>;
  const body = Object.keys(record)
    .sort()
    .map((key) => `${encodeString(key)}: ${pyJson(record[key])}`)
    .join(", ");
  return "{" + body + "}";
}
