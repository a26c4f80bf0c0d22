"""Static source-code metrics for Java-like files.

Every count is a documented heuristic, not a parse. Comments are located
with a small scanner that understands ``//`` and ``/* */`` comments as well
as string and char literals (comment markers inside literals are ignored).
Keyword-based counts (loops, classes, annotations, ...) run on a skeleton in
which both comments and literal contents have been blanked, so keywords in
strings or comments are never counted.
"""

from __future__ import annotations

import csv
import re
from dataclasses import asdict, astuple, dataclass, fields
from pathlib import Path

import numpy as np

from .dataset import DEFAULT_LABEL, DataError, FeatureMatrix


@dataclass(frozen=True)
class MetricVector:
    loc: float = 0
    sloc: float = 0
    comment_count: float = 0
    comment_density: float = 0.0
    blank_lines: float = 0
    total_tokens: float = 0
    unique_tokens: float = 0
    avg_line_length: float = 0.0
    code_chars: float = 0
    function_count: float = 0
    variable_count: float = 0
    loop_count: float = 0
    conditional_count: float = 0
    try_catch_count: float = 0
    import_count: float = 0
    class_count: float = 0
    interface_count: float = 0
    annotation_count: float = 0
    method_invocation_count: float = 0
    literal_count: float = 0

    def as_dict(self) -> dict:
        return asdict(self)

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=np.float64)


METRIC_NAMES = [f.name for f in fields(MetricVector)]

_IDENT = r"[A-Za-z_$][\w$]*"
_TOKEN_RE = re.compile(r"[A-Za-z0-9_$]+|[^\sA-Za-z0-9_$]")
_CONTROL = {"if", "for", "while", "switch", "catch", "return", "new", "else", "do",
            "try", "synchronized", "throw", "assert"}
_FUNC_RE = re.compile(
    r"\b(?:public|private|protected|static|final|abstract|synchronized|native|void|"
    r"function|def|int|long|double|float|boolean|char|byte|short|String)\b"
    r"(?:\s+[\w$<>\[\],.?]+)*?\s+(" + _IDENT + r")\s*\("
)
_VAR_RE = re.compile(
    r"\b(?:int|long|double|float|boolean|char|byte|short|String|var|let|const)\b"
    r"(?:\s*\[\s*\])*\s+(" + _IDENT + r")\b(?!\s*\()"
)
_LEAD_WORD_RE = re.compile(r"\s*(\w+)")
_LOOP_RE = re.compile(r"\b(?:for|while|do)\b")
_COND_RE = re.compile(r"\b(?:if|else|switch|case)\b")
_TRY_RE = re.compile(r"\b(?:try|catch|finally)\b")
_IMPORT_RE = re.compile(r"^[ \t]*import\s", re.MULTILINE)
_CLASS_RE = re.compile(r"(?<![\w$.])class\s+" + _IDENT)
_INTERFACE_RE = re.compile(r"(?<![\w$.])interface\s+" + _IDENT)
_ANNOTATION_RE = re.compile(r"@(?!interface\b)" + _IDENT)
_INVOKE_RE = re.compile(_IDENT + r"\s*\.\s*" + _IDENT + r"\s*\(")
_NUMBER_RE = re.compile(
    r"(?<![\w$.])(?:0[xX][0-9a-fA-F_]+|\d[\d_]*(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"[lLfFdD]?(?![\w$])"
)


@dataclass
class _Scan:
    code: str  # comments blanked, literals intact
    skeleton: str  # comments and literal contents blanked
    comment_count: int
    literal_count: int


def _scan(source: str) -> _Scan:
    code, skel = [], []
    comments = literals = 0
    state = "code"
    i, n = 0, len(source)
    while i < n:
        ch = source[i]
        nxt = source[i + 1] if i + 1 < n else ""
        if ch == "\n":
            if state == "line":
                state = "code"
            elif state in ("str", "chr"):
                # unterminated literal: Java literals never span lines
                state = "code"
            code.append(ch)
            skel.append(ch)
            i += 1
            continue
        if state == "code":
            if ch == "/" and nxt == "/":
                state = "line"
                comments += 1
                code.append("  ")
                skel.append("  ")
                i += 2
                continue
            if ch == "/" and nxt == "*":
                state = "block"
                comments += 1
                code.append("  ")
                skel.append("  ")
                i += 2
                continue
            if ch == '"' or ch == "'":
                state = "str" if ch == '"' else "chr"
                literals += 1
            code.append(ch)
            skel.append(ch)
            i += 1
        elif state == "line":
            code.append(" ")
            skel.append(" ")
            i += 1
        elif state == "block":
            if ch == "*" and nxt == "/":
                state = "code"
                code.append("  ")
                skel.append("  ")
                i += 2
            else:
                code.append(" ")
                skel.append(" ")
                i += 1
        else:  # inside a string or char literal
            quote = '"' if state == "str" else "'"
            if ch == "\\" and nxt and nxt != "\n":
                code.append(ch + nxt)
                skel.append("  ")
                i += 2
                continue
            if ch == quote:
                state = "code"
                code.append(ch)
                skel.append(ch)
            else:
                code.append(ch)
                skel.append(" ")
            i += 1
    return _Scan("".join(code), "".join(skel), comments, literals)


def _lines(text: str) -> list[str]:
    if not text:
        return []
    lines = text.split("\n")
    if text.endswith("\n"):
        lines.pop()
    return lines


def extract_metrics(source: str) -> MetricVector:
    """Compute the 20 static metrics of one source file."""
    if not source:
        return MetricVector()
    scan = _scan(source)
    raw_lines = _lines(source)
    code_lines = _lines(scan.code)
    loc = len(raw_lines)

    blank = sloc = 0
    for idx, raw in enumerate(raw_lines):
        if not raw.strip():
            blank += 1
        elif code_lines[idx].strip():
            sloc += 1
    # the remaining lines hold comment text only

    tokens = _TOKEN_RE.findall(scan.code)
    skel = scan.skeleton
    functions = 0
    for line in _lines(skel):
        m = _FUNC_RE.search(line)
        if m is None or m.group(1) in _CONTROL:
            continue
        lead = _LEAD_WORD_RE.match(line)
        if lead is None or lead.group(1) not in _CONTROL:
            functions += 1

    return MetricVector(
        loc=loc,
        sloc=sloc,
        comment_count=scan.comment_count,
        comment_density=scan.comment_count / loc if loc else 0.0,
        blank_lines=blank,
        total_tokens=len(tokens),
        unique_tokens=len(set(tokens)),
        avg_line_length=sum(len(line) for line in raw_lines) / loc if loc else 0.0,
        code_chars=len(source),
        function_count=functions,
        variable_count=len(_VAR_RE.findall(skel)),
        loop_count=len(_LOOP_RE.findall(skel)),
        conditional_count=len(_COND_RE.findall(skel)),
        try_catch_count=len(_TRY_RE.findall(skel)),
        import_count=len(_IMPORT_RE.findall(skel)),
        class_count=len(_CLASS_RE.findall(skel)),
        interface_count=len(_INTERFACE_RE.findall(skel)),
        annotation_count=len(_ANNOTATION_RE.findall(skel)),
        method_invocation_count=len(_INVOKE_RE.findall(skel)),
        literal_count=scan.literal_count + len(_NUMBER_RE.findall(skel)),
    )


def comment_only_lines(source: str) -> int:
    """Lines that are neither blank nor carry code."""
    m = extract_metrics(source)
    return int(m.loc - m.sloc - m.blank_lines)


def read_labels(path) -> dict[str, int]:
    """Labels CSV: a header, then ``relative/path,0|1`` rows."""
    labels: dict[str, int] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) < 2:
            raise DataError(f"{path}: expected a header with a path and a label column")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            rel, raw = row[0].strip(), row[1].strip()
            if raw not in ("0", "1"):
                raise DataError(f"{path}:{lineno}: label {raw!r} is not 0 or 1")
            if rel in labels:
                raise DataError(f"{path}:{lineno}: duplicate path {rel!r}")
            labels[rel] = int(raw)
    if not labels:
        raise DataError(f"{path}: no labeled files")
    return labels


def extract_corpus(root, labels) -> FeatureMatrix:
    """One row of metrics per labeled file, ordered by relative path."""
    root = Path(root)
    if not isinstance(labels, dict):
        labels = read_labels(labels)
    rows, ys, ids = [], [], []
    for rel in sorted(labels):
        path = root / rel
        if not path.is_file():
            raise DataError(f"labeled file not found: {rel}")
        try:
            text = path.read_text(encoding="utf-8", errors="replace")
        except OSError as exc:
            raise DataError(f"cannot read {rel}: {exc}") from exc
        rows.append(extract_metrics(text).as_array())
        ys.append(labels[rel])
        ids.append(rel)
    return FeatureMatrix(METRIC_NAMES, np.vstack(rows), np.array(ys), ids)


def write_corpus_csv(matrix: FeatureMatrix, path, label_column: str = DEFAULT_LABEL) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["path"] + matrix.feature_names + [label_column])
        for i in range(matrix.n_rows):
            vals = [repr(float(v)) if not float(v).is_integer() else str(int(v)) for v in matrix.X[i]]
            w.writerow([matrix.source_ids[i]] + vals + [str(int(matrix.y[i]))])
