"""Task definitions and the dev-set fitness function for LLM-evaluated prompts.

A task directory holds ``task.json`` plus ``train``/``dev``/``test`` splits as JSONL
(``{"input", "label"}`` or ``{"input", "references"}``) or, for two-column classification,
TSV. An optional ``demo.jsonl`` (or ``demo.txt`` for fixed chain-of-thought shots) supplies
demonstrations.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import metrics
from .provider import EVAL_TEMPERATURE, CompletionRequest, complete_many
from .types import Prompt, text_digest

log = logging.getLogger(__name__)

TASK_KINDS = ("classification", "summarization", "simplification", "bbh")
SPLITS = ("train", "dev", "test")
DEFAULT_DEV_SIZE = {"classification": 200, "summarization": 100, "simplification": 100, "bbh": 50}
DEFAULT_SHOTS = {"classification": 1, "summarization": 0, "simplification": 0, "bbh": 3}
DEFAULT_METRIC = {"classification": "accuracy", "summarization": "rouge_mean",
                  "simplification": "sari", "bbh": "accuracy"}
METRICS = ("accuracy", "normalized", "rouge1", "rouge2", "rougeL", "rouge_mean", "sari")
BASELINE_PROMPT = "Let's think step by step."

_PLACEHOLDER = re.compile(r"\{\{(PROMPT|INPUT|DESC|DEMO)\}\}")


@dataclass(frozen=True)
class TaskTemplate:
    body: str
    completion_anchor: str

    def __post_init__(self):
        for name in ("PROMPT", "INPUT"):
            if self.body.count("{{%s}}" % name) != 1:
                raise ValueError(f"template must contain {{{{{name}}}}} exactly once")

    def fill(self, values: dict[str, str]) -> str:
        return _PLACEHOLDER.sub(lambda m: values.get(m.group(1), m.group(0)), self.body)


ALPACA_TEMPLATE = TaskTemplate(
    "Below is an instruction that describes a task, paired with an input that provides "
    "further context. Write a response that appropriately completes the request.\n\n"
    "### Instruction:\n{{PROMPT}}\n\n### Input:\n{{INPUT}}\n\n### Response:\n",
    "### Response:",
)
SUMMARIZATION_TEMPLATE = TaskTemplate("{{PROMPT}}\n{{INPUT}}\nTL;DR:", "TL;DR:")
SIMPLIFICATION_TEMPLATE = TaskTemplate(
    "{{PROMPT}}\n{{INPUT}}\nThe simplification of the sentence is",
    "The simplification of the sentence is",
)
BBH_TEMPLATE = TaskTemplate("{{DESC}}\n{{DEMO}}Q: {{INPUT}}\nA: {{PROMPT}}", "A: {{PROMPT}}")

DEFAULT_TEMPLATES = {
    "classification": ALPACA_TEMPLATE,
    "summarization": SUMMARIZATION_TEMPLATE,
    "simplification": SIMPLIFICATION_TEMPLATE,
    "bbh": BBH_TEMPLATE,
}


@dataclass(frozen=True)
class Example:
    input: str
    references: tuple[str, ...] = ()
    label: str | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "Example":
        refs = d.get("references")
        if refs is None and "reference" in d:
            refs = [d["reference"]]
        label = d.get("label")
        return cls(str(d["input"]), tuple(refs or ()), None if label is None else str(label))


@dataclass
class TaskSpec:
    name: str
    task_kind: str
    template: TaskTemplate
    dev: list[Example]
    test: list[Example] = field(default_factory=list)
    train: list[Example] = field(default_factory=list)
    demo_pool: list[Example] = field(default_factory=list)
    label_space: list[str] = field(default_factory=list)
    metric: str = ""
    shots: int = 0
    dev_size: int | None = None
    description: str = ""
    baseline_prompt: str | None = None
    demo_text: str | None = None
    demonstration: str = ""

    def __post_init__(self):
        if self.task_kind not in TASK_KINDS:
            raise ValueError(f"unknown task kind {self.task_kind!r}")
        self.metric = self.metric or DEFAULT_METRIC[self.task_kind]
        if self.metric not in METRICS:
            raise ValueError(f"unknown metric {self.metric!r}")
        if self.shots < 0:
            raise ValueError("shots must be >= 0")
        if self.task_kind == "classification":
            if not self.label_space:
                raise ValueError("classification tasks need a label space")
            for split in (self.dev, self.test, self.demo_pool):
                for ex in split:
                    if ex.label not in self.label_space:
                        raise ValueError(f"label {ex.label!r} not in label space")
        if self.metric == "normalized" and not self.baseline_prompt:
            self.baseline_prompt = BASELINE_PROMPT
        dev_inputs = {e.input for e in self.dev}
        if dev_inputs & {e.input for e in self.test}:
            raise ValueError("dev and test splits overlap")
        if {e.input for e in self.demo_pool} & (dev_inputs | {e.input for e in self.test}):
            raise ValueError("demonstration pool overlaps the dev or test split")

    @property
    def task_id(self) -> str:
        return f"{self.name}:{self.task_kind}:{self.metric}"

    @property
    def score_scale(self) -> float:
        return metric_scale(self.metric)

    def split(self, name: str) -> list[Example]:
        if name not in SPLITS:
            raise ValueError(f"unknown split {name!r}")
        return getattr(self, name)


def metric_scale(metric: str) -> float:
    return 100.0 if metric in ("sari", "normalized") else 1.0


# -- loading -----------------------------------------------------------------------------

def read_split(path: Path) -> list[Example]:
    if path.suffix == ".tsv":
        out = []
        for line in path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            cols = line.split("\t")
            if len(cols) != 2:
                raise ValueError(f"{path}: TSV rows need exactly two columns (input, label)")
            out.append(Example(cols[0], (), cols[1]))
        return out
    return [Example.from_dict(json.loads(line))
            for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]


def _find_split(root: Path, name: str) -> Path | None:
    for ext in (".jsonl", ".tsv"):
        if (root / f"{name}{ext}").exists():
            return root / f"{name}{ext}"
    return None


def load_task(path: str | Path, seed: int = 0, dev_size: int | None = None) -> TaskSpec:
    """Load a task directory, subsample dev to ``dev_size`` with ``seed``, fix demonstrations."""
    root = Path(path)
    meta_path = root / "task.json"
    if not meta_path.exists():
        raise FileNotFoundError(f"{meta_path} not found")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    kind = meta.get("task_kind", "classification")
    if kind not in TASK_KINDS:
        raise ValueError(f"{meta_path}: unknown task_kind {kind!r}")
    splits = {}
    for name in SPLITS:
        p = _find_split(root, name)
        splits[name] = read_split(p) if p else []
    if not splits["dev"]:
        raise ValueError(f"{root}: no dev split")
    demo_pool = read_split(root / "demo.jsonl") if (root / "demo.jsonl").exists() else splits["train"]
    demo_text = (root / "demo.txt").read_text(encoding="utf-8") if (root / "demo.txt").exists() else None

    template = DEFAULT_TEMPLATES[kind]
    if "template" in meta:
        t = meta["template"]
        template = TaskTemplate(t["body"], t.get("completion_anchor", ""))

    rng = np.random.default_rng(seed)
    size = dev_size or meta.get("dev_size") or DEFAULT_DEV_SIZE[kind]
    dev = splits["dev"]
    if len(dev) > size:
        keep = sorted(int(i) for i in rng.choice(len(dev), size=size, replace=False))
        log.info("subsampled dev split of %s: %d of %d examples (seed %d)",
                 root.name, size, len(dev), seed)
        dev = [dev[i] for i in keep]

    task = TaskSpec(
        name=meta.get("name", root.name),
        task_kind=kind,
        template=template,
        dev=dev,
        test=splits["test"],
        train=splits["train"],
        demo_pool=demo_pool,
        label_space=list(meta.get("label_space", [])),
        metric=meta.get("metric", ""),
        shots=int(meta.get("shots", DEFAULT_SHOTS[kind])),
        dev_size=size,
        description=meta.get("description", ""),
        baseline_prompt=meta.get("baseline_prompt"),
        demo_text=demo_text,
    )
    task.demonstration = build_demonstration(task, rng)
    return task


# -- rendering ---------------------------------------------------------------------------

def _answer(ex: Example) -> str:
    return ex.label if ex.label is not None else (ex.references[0] if ex.references else "")


def build_demonstration(task: TaskSpec, rng: np.random.Generator) -> str:
    """Demonstration blocks prepended to every query.

    Blocks keep a literal ``{{PROMPT}}`` so the instruction under evaluation appears in them
    too; :func:`render_task_prompt` fills it in.
    """
    if task.shots == 0:
        return ""
    if task.task_kind == "bbh":
        if task.demo_text:
            return task.demo_text.strip("\n") + "\n\n"
        if len(task.demo_pool) < task.shots:
            raise ValueError(f"{task.shots} shots requested, {len(task.demo_pool)} demos available")
        blocks = [f"Q: {ex.input}\nA: {{{{PROMPT}}}} So the answer is {_answer(ex)}."
                  for ex in task.demo_pool[:task.shots]]
        return "\n\n".join(blocks) + "\n\n"

    def block(ex: Example) -> str:
        filled = task.template.fill({"INPUT": ex.input, "DESC": task.description, "DEMO": ""})
        return filled.rstrip() + " " + _answer(ex) if not filled.endswith("\n") \
            else filled + _answer(ex)

    if task.task_kind == "classification":
        blocks = []
        for label in task.label_space:
            pool = [ex for ex in task.demo_pool if ex.label == label]
            if not pool:
                raise ValueError(f"no demonstration example for class {label!r}")
            blocks.append(block(pool[int(rng.integers(len(pool)))]))
    else:
        if len(task.demo_pool) < task.shots:
            raise ValueError(f"{task.shots} shots requested, {len(task.demo_pool)} demos available")
        idx = sorted(int(i) for i in rng.choice(len(task.demo_pool), size=task.shots, replace=False))
        blocks = [block(task.demo_pool[i]) for i in idx]
    return "\n\n".join(blocks) + "\n\n"


def render_task_prompt(task: TaskSpec, prompt: Prompt | str, example: Example) -> str:
    text = prompt.text if isinstance(prompt, Prompt) else prompt
    values = {"PROMPT": text.strip(), "INPUT": example.input, "DESC": task.description}
    if "{{DEMO}}" in task.template.body:
        values["DEMO"] = task.demonstration
        head = ""
    else:
        head = task.demonstration
    demo_filled = _PLACEHOLDER.sub(lambda m: values["PROMPT"] if m.group(1) == "PROMPT"
                                   else m.group(0), head)
    if "DEMO" in values:
        values["DEMO"] = _PLACEHOLDER.sub(lambda m: values["PROMPT"] if m.group(1) == "PROMPT"
                                          else m.group(0), values["DEMO"])
    return demo_filled + task.template.fill(values)


# -- parsing and scoring -----------------------------------------------------------------

def parse_label(completion: str, label_space: Sequence[str]):
    """Map a completion onto the label space, or :data:`metrics.UNPARSED`.

    First the trimmed first line is matched case-insensitively; failing that, the first label
    (in label-space order) occurring as a whole word anywhere in the completion wins.
    """
    if not label_space:
        raise ValueError("empty label space")
    text = completion.strip()
    first = text.splitlines()[0].strip().casefold() if text else ""
    for label in label_space:
        if first == label.casefold():
            return label
    for label in label_space:
        if re.search(r"(?<!\w)" + re.escape(label) + r"(?!\w)", text, re.IGNORECASE):
            return label
    return metrics.UNPARSED


_ANSWER_IS = re.compile(r"answer is\s*:?\s*(.+)", re.IGNORECASE)


def parse_bbh_answer(completion: str, label_space: Sequence[str]):
    found = _ANSWER_IS.findall(completion)
    answer = found[-1].strip() if found else completion.strip()
    answer = answer.splitlines()[0].strip().rstrip(".").strip() if answer else ""
    if label_space:
        return parse_label(answer, label_space)
    return answer.casefold() if answer else metrics.UNPARSED


def prediction(task: TaskSpec, completion: str):
    if task.task_kind == "classification":
        return parse_label(completion, task.label_space)
    if task.task_kind == "bbh":
        return parse_bbh_answer(completion, task.label_space)
    return completion.strip()


def aggregate(task: TaskSpec, examples: Sequence[Example], completions: Sequence[str],
              tokenizer=metrics.tokenize) -> float:
    preds = [prediction(task, c) for c in completions]
    m = task.metric
    if m in ("accuracy", "normalized"):
        golds = [e.label if task.task_kind != "bbh" or task.label_space else
                 (e.label or "").strip().rstrip(".").casefold() for e in examples]
        return metrics.accuracy(preds, golds)
    if m == "sari":
        vals = [metrics.sari(e.input, p, e.references, tokenizer) for e, p in zip(examples, preds)]
    elif m == "rouge_mean":
        vals = [(metrics.rouge_n(p, e.references, 1, tokenizer)
                 + metrics.rouge_n(p, e.references, 2, tokenizer)
                 + metrics.rouge_l(p, e.references, tokenizer)) / 3
                for e, p in zip(examples, preds)]
    elif m == "rougeL":
        vals = [metrics.rouge_l(p, e.references, tokenizer) for e, p in zip(examples, preds)]
    else:
        n = int(m[-1])
        vals = [metrics.rouge_n(p, e.references, n, tokenizer) for e, p in zip(examples, preds)]
    return float(sum(vals) / len(vals))


def score_prompt(prompt: Prompt | str, task: TaskSpec, client, model: str, split: str = "dev",
                 cache: dict | None = None, max_workers: int = 1, max_tokens: int = 256) -> float:
    """Complete every example of ``split`` with ``prompt`` and aggregate the task metric.

    With ``metric == "normalized"`` the result is the accuracy gap to the baseline prompt in
    percentage points. ``cache`` maps (prompt digest, task id, split) to earlier results.
    """
    text = prompt.text if isinstance(prompt, Prompt) else prompt
    key = (text_digest(text), task.task_id, split)
    if cache is not None and key in cache:
        return cache[key]
    examples = task.split(split)
    if not examples:
        raise ValueError(f"split {split!r} of task {task.name} is empty")
    requests = [CompletionRequest.user(model, render_task_prompt(task, text, ex),
                                       temperature=EVAL_TEMPERATURE, top_p=1.0,
                                       max_tokens=max_tokens, purpose="task_eval")
                for ex in examples]
    completions = complete_many(client, requests, max_workers)
    score = aggregate(task, examples, completions)
    if task.metric == "normalized":
        base_task = replace(task, metric="accuracy")
        base = score_prompt(task.baseline_prompt, base_task, client, model, split, cache,
                            max_workers, max_tokens)
        score = metrics.normalized_score(score, base)
    if cache is not None:
        cache[key] = score
    return score


class TaskFitness:
    """Fitness function scoring a prompt on one split of a task through a chat client."""

    def __init__(self, task: TaskSpec, client, model: str, split: str = "dev",
                 max_workers: int = 1, max_tokens: int = 256, cache: bool = True):
        self.task = task
        self.client = client
        self.model = model
        self.split = split
        self.max_workers = max_workers
        self.max_tokens = max_tokens
        self._cache: dict | None = {} if cache else None

    @property
    def task_id(self) -> str:
        return self.task.task_id

    def evaluate(self, text: str) -> float:
        return score_prompt(text, self.task, self.client, self.model, self.split, self._cache,
                            self.max_workers, self.max_tokens)
