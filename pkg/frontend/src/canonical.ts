/** Canonical JSON: object keys sorted, 2-space indent, trailing newline.
 *
 * The editor's losslessness guarantee is stated in terms of this
 * serializer: loading a recipe and saving it back must reproduce the
 * identical canonical string.
 */

export function canonicalJson(value: unknown): string {
  return writeValue(value, 0) + "\n";
}

function writeValue(value: unknown, depth: number): string {
  if (value === null || typeof value === "boolean" || typeof value === "number") {
    return JSON.stringify(value);
  }
  if (typeof value === "string") {
    return JSON.stringify(value);
  }
  if (Array.isArray(value)) {
    if (value.length === 0) return "[]";
    const pad = "  ".repeat(depth + 1);
    const items = value.map((v) => pad + writeValue(v, depth + 1));
    return "[\n" + items.join(",\n") + "\n" + "  ".repeat(depth) + "]";
  }
  if (typeof value === "object") {
    const obj = value as Record<string, unknown>;
    const keys = Object.keys(obj)
      .filter((k) => obj[k] !== undefined)
      .sort();
    if (keys.length === 0) return "{}";
    const pad = "  ".repeat(depth + 1);
    const items = keys.map((k) => `${pad}${JSON.stringify(k)}: ${writeValue(obj[k], depth + 1)}`);
    return "{\n" + items.join(",\n") + "\n" + "  ".repeat(depth) + "}";
  }
  throw new Error(`cannot canonicalize ${typeof value}`);
}
