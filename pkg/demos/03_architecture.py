"""Dependency graph and butterfly metrics of a small project."""
import tempfile
from pathlib import Path

from vulnlearn.archgraph import all_metrics, drh_layers, extract_dependencies

files = {
    "app/Main.java": "package app;\nimport app.db.Repo;\nimport app.web.Page;\nclass Main { Repo r; Page p; }\n",
    "app/web/Page.java": "package app.web;\nimport app.db.Repo;\nclass Page { Repo r; }\n",
    "app/db/Repo.java": "package app.db;\nimport app.util.Log;\nclass Repo { Log l; }\n",
    "app/util/Log.java": "package app.util;\nclass Log {}\n",
}
root = Path(tempfile.mkdtemp())
for rel, text in files.items():
    (root / rel).parent.mkdir(parents=True, exist_ok=True)
    (root / rel).write_text(text)

G = extract_dependencies(root)
# an edge f -> g means f depends on g
print(sorted(G.edges))
print(drh_layers(G))

for m in all_metrics(G):
    print(f"{m.file_id:22} in={m.fan_in} out={m.fan_out} layer={m.drh_layer} "
          f"space={m.space_size} up=({m.upper_width},{m.upper_depth}) down=({m.lower_width},{m.lower_depth})")
