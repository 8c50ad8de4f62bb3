"""Multi-step runs with a provenance manifest.

A pipeline config is JSON:

    {"steps": [
        {"name": "clean", "command": "normalize", "args": {"in": "raw.txt", "out": "clean.txt"}},
        {"name": "noise", "command": "noise", "args": {"in": "train.conll", "out": "noised.conll",
                                                       "fraction": 0.2, "alphabet-from": "dev.txt",
                                                       "seed": 7}}
    ]}

Steps run in order through the regular CLI dispatch, so a pipeline step
behaves exactly like the equivalent command line. The manifest records, per
step, the argv, the effective seed, and SHA-256 digests of every declared
input and output file; it contains no timestamps, so re-running an identical
pipeline reproduces the manifest byte for byte. A failing step aborts the run
and the manifest records the partial state.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Mapping


class PipelineError(Exception):
    pass


# Declared file-argument roles per command (first argv token).
COMMAND_INPUTS: dict[str, set[str]] = {
    "parse-check": {"in"},
    "stats": {"in", "unseen-from"},
    "split": {"in"},
    "noise": {"in", "alphabet-from", "config"},
    "normalize": {"in"},
    "evaluate": {"gold", "pred"},
    "subword-ratio": {"vocab", "in", "compare"},
    "correlate": {"in"},
    "surgery": {"a", "b", "scheme"},
}
COMMAND_OUTPUTS: dict[str, set[str]] = {
    "parse-check": {"out"},
    "stats": {"out"},
    "split": {"out1", "out2"},
    "noise": {"out"},
    "normalize": {"out", "trace"},
    "evaluate": {"out"},
    "subword-ratio": {"out"},
    "correlate": {"out"},
    "surgery": {"out"},
}


def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _build_argv(command: str, args: Mapping[str, object]) -> list[str]:
    argv = command.split()
    for key, value in args.items():
        flag = f"--{key}"
        if isinstance(value, bool):
            if value:
                argv.append(flag)
        elif value is None:
            continue
        else:
            argv.extend([flag, str(value)])
    return argv


def _digest_existing(paths: list[str]) -> dict[str, str]:
    return {p: sha256_file(p) for p in sorted(paths) if Path(p).is_file()}


def run_pipeline(config_path: str | Path, manifest_path: str | Path | None = None) -> int:
    """Execute a pipeline config; returns 0 on success, 1 on step failure."""
    from . import cli  # late import: cli imports this module for the subcommand

    config_path = Path(config_path)
    if manifest_path is None:
        manifest_path = config_path.with_suffix(config_path.suffix + ".manifest.json")
    config_bytes = config_path.read_bytes()
    config = json.loads(config_bytes.decode("utf-8"))

    if not isinstance(config, dict):
        raise PipelineError("pipeline config must be a JSON object")
    unknown = set(config) - {"steps"}
    if unknown:
        raise PipelineError(f"unknown pipeline config keys: {sorted(unknown)}")
    steps = config.get("steps", [])
    if not isinstance(steps, list):
        raise PipelineError("'steps' must be a list")

    manifest: dict = {
        "config": str(config_path),
        "config_digest": hashlib.sha256(config_bytes).hexdigest(),
        "steps": [],
        "status": "ok",
    }

    status = 0
    for i, step in enumerate(steps):
        unknown = set(step) - {"name", "command", "args"}
        if unknown:
            raise PipelineError(f"step {i}: unknown keys {sorted(unknown)}")
        if "command" not in step:
            raise PipelineError(f"step {i}: missing 'command'")
        command = step["command"]
        args = step.get("args", {})
        base = command.split()[0]
        if base not in COMMAND_INPUTS:
            raise PipelineError(f"step {i}: unknown command {command!r}")

        argv = _build_argv(command, args)
        inputs = _digest_existing([str(args[k]) for k in COMMAND_INPUTS[base] if k in args])

        try:
            code = cli.main(argv)
        except SystemExit as exc:  # argparse usage errors inside a step
            code = int(exc.code or 0)

        record = {
            "name": step.get("name", f"step{i}"),
            "command": command,
            "argv": argv,
            "seed": args.get("seed"),
            "inputs": inputs,
            "outputs": _digest_existing([str(args[k]) for k in COMMAND_OUTPUTS[base] if k in args]),
            "status": "ok" if code == 0 else f"failed ({code})",
        }
        manifest["steps"].append(record)
        if code != 0:
            manifest["status"] = "failed"
            status = 1
            break

    Path(manifest_path).write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return status
