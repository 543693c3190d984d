"""Deterministic synthetic Java-like projects with planted vulnerability signals.

``TOKEN``
    Vulnerable files contain insecure API idioms (string-built SQL,
    ``Runtime.exec``, MD5, ...); clean files use the safe counterparts. The
    import graph is random and carries no label information.
``ARCH``
    Vulnerable files are dependency hubs: most imports point at them, so
    their fan-in is high. Every file carries insecure idioms drawn the same
    way, so tokens carry no label information.
``MIXED``
    Vulnerable files are hubs, and half of them also carry insecure idioms.
"""
from __future__ import annotations

import enum
import random
from pathlib import Path

from .pipeline import DatasetManifest


class Signal(str, enum.Enum):
    TOKEN = "token"
    ARCH = "arch"
    MIXED = "mixed"


_NOUNS = ["order", "account", "user", "invoice", "report", "session", "cart", "payment",
          "profile", "message", "ticket", "catalog", "inventory", "shipment", "audit",
          "config", "document", "schedule", "metric", "contact", "review", "coupon"]
_ROLES = ["Service", "Manager", "Handler", "Util", "Controller", "Repository", "Helper",
          "Builder", "Validator", "Adapter", "Provider", "Mapper"]
_VARS = ["count", "name", "items", "values", "result", "buffer", "total", "index", "entry",
         "record", "payload", "status", "limit", "offset", "key", "label", "amount", "cache"]
_COMMENT_WORDS = ["handles", "the", "incoming", "request", "returns", "cached", "value",
                  "refactor", "later", "see", "issue", "tracker", "legacy", "path", "kept",
                  "for", "compatibility", "note", "thread", "safe", "assumes", "non", "null"]

_NEUTRAL = [
    "int {v} = {w}.size();",
    "String {v} = {w}.getName();",
    "List<String> {v} = new ArrayList<>();",
    "{w}.add({v});",
    "if ({v} != null) {{ {w}.close(); }}",
    "for (int i = 0; i < {v}.length; i++) {{ total += i; }}",
    "logger.info(\"processing \" + {v});",
    "Map<String, Integer> {v} = new HashMap<>();",
    "{v}.put(\"{w}\", {n});",
    "double {v} = Math.max({w}, {n});",
    "StringBuilder {v} = new StringBuilder();",
    "{v}.append({w}).append(\",\");",
    "boolean {v} = {w}.isEmpty();",
    "long {v} = System.currentTimeMillis();",
    "Optional<String> {v} = Optional.ofNullable({w});",
]

# insecure idiom -> safe counterpart
_SINKS = [
    ("Statement stmt = connection.createStatement();\n"
     "        ResultSet rs = stmt.executeQuery(\"SELECT * FROM accounts WHERE id = \" + input);",
     "PreparedStatement ps = connection.prepareStatement(\"SELECT * FROM accounts WHERE id = ?\");\n"
     "        ps.setString(1, input);"),
    ("Runtime.getRuntime().exec(\"sh -c \" + input);",
     "ProcessBuilder pb = new ProcessBuilder(\"ls\", whitelist.check(input));"),
    ("response.getWriter().println(request.getParameter(\"comment\"));",
     "response.getWriter().println(Encode.forHtml(request.getParameter(\"comment\")));"),
    ("File target = new File(uploadDir + request.getParameter(\"filename\"));",
     "File target = new File(uploadDir, FilenameUtils.getName(safeName));"),
    ("MessageDigest md = MessageDigest.getInstance(\"MD5\");",
     "MessageDigest md = MessageDigest.getInstance(\"SHA-256\");"),
    ("Random rnd = new Random();\n        int token = rnd.nextInt();",
     "SecureRandom rnd = new SecureRandom();\n        byte[] token = rnd.generateSeed(16);"),
    ("Cookie cookie = new Cookie(\"session\", sid);\n        cookie.setSecure(false);",
     "Cookie cookie = new Cookie(\"session\", sid);\n        cookie.setSecure(true);"),
    ("String expr = \"/users/user[@name='\" + input + \"']\";\n        xpath.evaluate(expr, doc);",
     "xpath.setXPathVariableResolver(resolver);\n        xpath.evaluate(\"/users/user[@name=$name]\", doc);"),
]


def _class_names(rng: random.Random, n: int) -> list[str]:
    names, seen = [], set()
    while len(names) < n:
        base = rng.choice(_NOUNS).capitalize() + rng.choice(_ROLES)
        name = base if base not in seen else f"{base}{len(names)}"
        if name in seen:
            continue
        seen.add(name)
        names.append(name)
    return names


def _comment(rng: random.Random, k: int) -> str:
    return " ".join(rng.choice(_COMMENT_WORDS) for _ in range(k))


def _statement(rng: random.Random) -> str:
    return rng.choice(_NEUTRAL).format(v=rng.choice(_VARS), w=rng.choice(_VARS),
                                       n=rng.randint(0, 99))


def _render(package: str, name: str, deps: list[tuple[str, str]], body: list[str],
            rng: random.Random) -> str:
    lines = [f"package {package};", ""]
    for dep_pkg, dep_name in deps:
        if dep_pkg != package:
            lines.append(f"import {dep_pkg}.{dep_name};")
    lines += ["import java.util.*;", "", "/**", f" * {_comment(rng, rng.randint(4, 9))}", " */",
              f"public class {name} {{", "",
              f"    // {_comment(rng, rng.randint(3, 6))}",
              "    public void run(String input) throws Exception {{"]
    for i, (_, dep_name) in enumerate(deps):
        lines.append(f"        {dep_name} dep{i} = new {dep_name}();")
    for stmt in body:
        lines.append(f"        {stmt}")
    lines += ["    }", "}", ""]
    return "\n".join(lines)


def generate_synthetic_corpus(out_dir: str | Path, seed: int = 0, n_files: int = 200,
                              vuln_rate: float = 0.4, signal: Signal | str = Signal.TOKEN,
                              project: str | None = None) -> tuple[Path, DatasetManifest]:
    """Write a project under ``out_dir/<project>`` plus ``manifest.csv``.

    Exactly ``round(n_files * vuln_rate)`` files are labeled vulnerable. The
    output bytes are a pure function of the arguments.
    """
    if not 0.0 < vuln_rate < 1.0:
        raise ValueError("vuln_rate must lie strictly between 0 and 1")
    if n_files < 2:
        raise ValueError("need at least two files")
    signal = Signal(signal)
    project = project or f"synth_{signal.value}_{seed}"
    rng = random.Random(f"{seed}:{n_files}:{vuln_rate}:{signal.value}")
    root = Path(out_dir) / project
    n_vuln = round(n_files * vuln_rate)
    vulnerable = set(rng.sample(range(n_files), n_vuln))
    names = _class_names(rng, n_files)
    subpkgs = ["core", "web", "data"]
    base_pkg = f"com.synth.{project.lower().replace('-', '_')}"
    packages = [f"{base_pkg}.{subpkgs[i % len(subpkgs)]}" for i in range(n_files)]

    hubs = sorted(vulnerable) if signal in (Signal.ARCH, Signal.MIXED) else []
    entries = []
    for i in range(n_files):
        label = int(i in vulnerable)
        n_deps = rng.randint(0, 4)
        deps = set()
        for _ in range(n_deps):
            if hubs and rng.random() < 0.75:
                j = rng.choice(hubs)
            else:
                j = rng.randrange(n_files)
            if j != i:
                deps.add(j)
        dep_list = [(packages[j], names[j]) for j in sorted(deps)]

        body = [_statement(rng) for _ in range(rng.randint(5, 10))]
        if signal is Signal.ARCH:
            plant = True
        else:
            plant = label == 1 and (signal is Signal.TOKEN or rng.random() < 0.5)
        for k in rng.sample(range(len(_SINKS)), rng.randint(1, 2)):
            body.insert(rng.randrange(len(body) + 1), _SINKS[k][0 if plant else 1])

        rel = Path("src", *packages[i].split("."), f"{names[i]}.java")
        path = root / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(_render(packages[i], names[i], dep_list, body, rng), encoding="utf-8")
        entries.append((rel.as_posix(), label))

    manifest = DatasetManifest(project=project, root=root, entries=sorted(entries))
    manifest.write(root / "manifest.csv")
    return root, manifest
