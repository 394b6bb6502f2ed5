"""Instruction templates that make an LLM act as the GA/DE operators, and response parsing."""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping

from .de import DeVariant
from .provider import OPERATOR_TEMPERATURE, OPERATOR_TOP_P, CompletionRequest
from .types import EvolutionOperator, OperatorError, Prompt

MARKER_OPEN, MARKER_CLOSE = "<prompt>", "</prompt>"
MAX_PROMPT_CHARS = 2000

REQUIRED_PLACEHOLDERS = {
    "ga": {"PROMPT1", "PROMPT2"},
    "de": {"PROMPT1", "PROMPT2", "PROMPT3", "BASIC_PROMPT"},
    "de_no_prompt3": {"PROMPT1", "PROMPT2", "BASIC_PROMPT"},
    "de_mutate_all": {"PROMPT1", "PROMPT2", "PROMPT3", "BASIC_PROMPT"},
    "de_mutate_all_no_prompt3": {"PROMPT1", "PROMPT2", "BASIC_PROMPT"},
    "resample": {"INPUT_PROMPT"},
}
# resampling is a plain paraphrase request; only the evolution operators get a worked example
HAS_ONESHOT = {k for k in REQUIRED_PLACEHOLDERS if k != "resample"}

_PLACEHOLDER = re.compile(r"\{\{([A-Z0-9_]+)\}\}")
_SPAN = re.compile(re.escape(MARKER_OPEN) + r"(.*?)" + re.escape(MARKER_CLOSE), re.DOTALL)
_MARKERS = re.compile(r"</?prompt>", re.IGNORECASE)
_STEP = re.compile(r"^Step (\d+):", re.MULTILINE)


@dataclass(frozen=True)
class OperatorTemplate:
    kind: str
    body: str
    oneshot_example: str = ""

    def __post_init__(self):
        if self.kind not in REQUIRED_PLACEHOLDERS:
            raise ValueError(f"unknown template kind {self.kind!r}")
        found = _PLACEHOLDER.findall(self.body)
        required = REQUIRED_PLACEHOLDERS[self.kind]
        if set(found) != required or len(found) != len(required):
            raise ValueError(f"{self.kind} template must contain each of {sorted(required)} "
                             f"exactly once, found {found}")
        if MARKER_OPEN not in self.body or MARKER_CLOSE not in self.body:
            raise ValueError(f"{self.kind} template does not mention the {MARKER_OPEN} marker")

    def render_task(self, values: Mapping[str, str]) -> str:
        missing = REQUIRED_PLACEHOLDERS[self.kind] - set(values)
        if missing:
            raise ValueError(f"missing values for {sorted(missing)}")
        return _PLACEHOLDER.sub(lambda m: escape_markers(values[m.group(1)]), self.body)

    def render(self, values: Mapping[str, str]) -> str:
        task = self.render_task(values)
        if self.oneshot_example:
            return self.oneshot_example.rstrip("\n") + "\n\n" + task
        return task


def escape_markers(text: str) -> str:
    return _MARKERS.sub(lambda m: m.group(0).replace("<", "&lt;").replace(">", "&gt;"), text)


def load_templates(directory: str | Path | None = None) -> dict[str, OperatorTemplate]:
    """Packaged templates, with any ``<kind>.txt`` / ``<kind>_oneshot.txt`` in ``directory``
    taking precedence."""
    packaged = resources.files("evoforge") / "templates"
    override = Path(directory) if directory else None

    def read(name: str) -> str:
        if override is not None and (override / name).exists():
            return (override / name).read_text(encoding="utf-8")
        return (packaged / name).read_text(encoding="utf-8")

    out = {}
    for kind in REQUIRED_PLACEHOLDERS:
        oneshot = read(f"{kind}_oneshot.txt") if kind in HAS_ONESHOT else ""
        out[kind] = OperatorTemplate(kind, read(f"{kind}.txt"), oneshot)
    return out


_DEFAULT_TEMPLATES: dict[str, OperatorTemplate] | None = None


def default_templates() -> dict[str, OperatorTemplate]:
    global _DEFAULT_TEMPLATES
    if _DEFAULT_TEMPLATES is None:
        _DEFAULT_TEMPLATES = load_templates()
    return _DEFAULT_TEMPLATES


def _clean(p: Prompt | str, role: str) -> str:
    text = (p.text if isinstance(p, Prompt) else p).strip()
    if not text:
        raise ValueError(f"{role} prompt is empty")
    return text


def de_template_kind(variant: DeVariant) -> str:
    kind = "de" if variant.mutate_scope == "diff" else "de_mutate_all"
    return kind + ("_no_prompt3" if variant.prompt3_source == "eliminate" else "")


def _render(template: OperatorTemplate, values: Mapping[str, str], oneshot: bool) -> str:
    return template.render(values) if oneshot else template.render_task(values)


def count_steps(text: str) -> int:
    """Number of distinct ``Step k:`` headers opening a line."""
    return len(set(_STEP.findall(text)))


def render_ga_instruction(parent1, parent2, templates=None, oneshot: bool = True) -> str:
    t = (templates or default_templates())["ga"]
    return _render(t, {"PROMPT1": _clean(parent1, "first parent"),
                       "PROMPT2": _clean(parent2, "second parent")}, oneshot)


def render_de_instruction(basic, donor1, donor2, prompt3, variant: DeVariant,
                          templates=None, oneshot: bool = True) -> str:
    if (prompt3 is None) != (variant.prompt3_source == "eliminate"):
        raise ValueError(f"prompt3 must be given iff the variant uses one ({variant.label})")
    values = {
        "PROMPT1": _clean(donor1, "first donor"),
        "PROMPT2": _clean(donor2, "second donor"),
        "BASIC_PROMPT": _clean(basic, "basic"),
    }
    if prompt3 is not None:
        values["PROMPT3"] = _clean(prompt3, "third")
    return _render((templates or default_templates())[de_template_kind(variant)], values, oneshot)


def render_resample_instruction(seed_prompt, templates=None) -> str:
    return (templates or default_templates())["resample"].render(
        {"INPUT_PROMPT": _clean(seed_prompt, "seed")})


@dataclass(frozen=True)
class OperatorResponse:
    raw: str
    extracted: str
    step_trace: str = ""


def parse_new_prompt(raw: str) -> OperatorResponse:
    """Take the last ``<prompt>...</prompt>`` span, else the last non-empty line.

    The result is trimmed with internal whitespace collapsed to single spaces.
    """
    if not raw or not raw.strip():
        raise OperatorError("empty completion")
    spans = list(_SPAN.finditer(raw))
    if spans:
        last = spans[-1]
        body, trace = last.group(1), raw[:last.start()]
    else:
        lines = raw.rstrip().splitlines()
        while lines and not lines[-1].strip():
            lines.pop()
        body, trace = lines[-1], "\n".join(lines[:-1])
    extracted = " ".join(body.split())
    if not extracted:
        raise OperatorError("completion yielded an empty prompt")
    return OperatorResponse(raw, extracted, trace.strip())


class LLMOperator(EvolutionOperator):
    """Runs the GA/DE/resample templates through a chat client and parses the new prompt.

    A response that cannot be parsed, or is longer than ``max_chars``, is sent back with a
    correction request; after ``max_retries`` such attempts an :class:`OperatorError` is raised.
    """

    def __init__(self, client, model: str, templates: dict[str, OperatorTemplate] | None = None,
                 temperature: float = OPERATOR_TEMPERATURE, top_p: float = OPERATOR_TOP_P,
                 max_tokens: int = 512, max_retries: int = 3, max_chars: int = MAX_PROMPT_CHARS):
        super().__init__()
        self.client = client
        self.model = model
        self.templates = templates or default_templates()
        self.temperature = temperature
        self.top_p = top_p
        self.max_tokens = max_tokens
        self.max_retries = max_retries
        self.max_chars = max_chars

    def ask(self, instruction: str) -> OperatorResponse:
        self._count()
        messages = [("user", instruction)]
        problem = ""
        for _ in range(self.max_retries):
            request = CompletionRequest(self.model, tuple(messages), self.temperature, self.top_p,
                                        self.max_tokens, purpose="operator")
            raw = self.client.complete(request)
            try:
                response = parse_new_prompt(raw)
            except OperatorError as exc:
                problem = str(exc)
            else:
                if len(response.extracted) <= self.max_chars:
                    return response
                problem = f"prompt of {len(response.extracted)} characters"
            messages += [("assistant", raw or " "),
                         ("user", f"That answer was not usable ({problem}). Give only the final "
                                  f"prompt, at most {self.max_chars} characters, wrapped in "
                                  f"{MARKER_OPEN} and {MARKER_CLOSE}.")]
        raise OperatorError(f"no usable prompt after {self.max_retries} attempts: {problem}")

    def crossover_mutate(self, parent1, parent2, rng=None) -> str:
        return self.ask(render_ga_instruction(parent1, parent2, self.templates)).extracted

    def de_evolve(self, basic, donor1, donor2, prompt3, variant, rng=None) -> str:
        text = render_de_instruction(basic, donor1, donor2, prompt3, variant, self.templates)
        return self.ask(text).extracted

    def resample(self, seed, rng=None) -> str:
        return self.ask(render_resample_instruction(seed, self.templates)).extracted
