"""Factorization prompt templates.

The wording is fixed and covered by golden files in ``tests/golden``; any
edit here must regenerate them on purpose.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from enum import Enum

from ..errors import KarError

MOVIE_FACTORS = ("genre", "actors", "directors", "theme", "mood",
                 "production quality", "critical acclaim")
NEWS_FACTORS = ("topic", "source", "region", "style", "freshness", "clarity", "impact")

PRESET_FACTORS = {"movie": MOVIE_FACTORS, "news": NEWS_FACTORS}

FACTOR_QUESTION = ("List the important factors or features that determine whether a user "
                   "will be interested in a {scenario}.")


class PromptKind(str, Enum):
    PREFERENCE = "preference"
    ITEM_FACTUAL = "item_factual"


class FactorParseError(KarError):
    def __init__(self, message, raw_text):
        super().__init__(message)
        self.raw_text = raw_text


@dataclass(frozen=True)
class ScenarioFactors:
    scenario: str
    factors: tuple

    def __post_init__(self):
        factors = tuple(self.factors)
        object.__setattr__(self, "factors", factors)
        if not factors:
            raise ValueError("scenario factors must be non-empty")
        if len(set(factors)) != len(factors):
            raise ValueError(f"duplicate factor names in {factors}")

    @classmethod
    def preset(cls, scenario):
        return cls(scenario, PRESET_FACTORS[scenario])

    def joined(self):
        f = list(self.factors)
        if len(f) == 1:
            return f[0]
        return ", ".join(f[:-1]) + ", and " + f[-1]


@dataclass(frozen=True)
class PromptRequest:
    kind: PromptKind
    entity_id: str
    rendered_text: str

    def __post_init__(self):
        object.__setattr__(self, "kind", PromptKind(self.kind))
        if not self.rendered_text:
            raise ValueError("rendered prompt text is empty")

    @property
    def prompt_hash(self):
        return prompt_hash(self.rendered_text)


def prompt_hash(text):
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


_LIST_ITEM = re.compile(r"^\s*(?:\d+[.)]|[-*•])\s*(.+?)\s*$")


def parse_factor_list(text):
    """Pull factor names out of a numbered or bulleted list.

    A trailing colon-description (``"Genre: the type of ..."``) is dropped and
    names are lower-cased. Raises FactorParseError if no list items are found.
    """
    names = []
    for line in text.splitlines():
        m = _LIST_ITEM.match(line)
        if not m:
            continue
        name = m.group(1).split(":", 1)[0].strip().strip("*").strip().rstrip(".").lower()
        if name and name not in names:
            names.append(name)
    if not names:
        raise FactorParseError("no factor list found in LLM response", text)
    return names


def elicit_factors(scenario_description, llm, scenario=None, override=None):
    """Ask the LLM for scenario factors.

    ``override`` replaces the parsed list; this is where expert-refined
    factors enter.
    """
    scenario = scenario or scenario_description
    prompt = FACTOR_QUESTION.format(scenario=scenario_description)
    response = llm.complete(prompt)
    if override:
        return ScenarioFactors(scenario, tuple(override))
    return ScenarioFactors(scenario, tuple(parse_factor_list(response)))


def _coerce_factors(factors, scenario="movie"):
    if isinstance(factors, ScenarioFactors):
        return factors
    if not factors:
        raise ValueError("factors must be non-empty")
    return ScenarioFactors(scenario, tuple(factors))


def describe_profile(profile):
    """Render MovieLens user features as a short description."""
    from ..dataset import AGE_GROUPS, OCCUPATIONS

    gender = {"M": "male user", "F": "female user"}.get(profile.get("gender"), "user")
    desc = f"a {gender}"
    age = profile.get("age")
    if age in AGE_GROUPS:
        desc += f" aged {AGE_GROUPS[age]}"
    occ = profile.get("occupation")
    if occ is not None and str(occ).isdigit() and int(occ) < len(OCCUPATIONS):
        desc += f" whose occupation is {OCCUPATIONS[int(occ)]}"
    zip_code = profile.get("zip")
    if zip_code and zip_code != "unknown":
        desc += f", living in zip code area {zip_code}"
    return desc


def build_preference_prompt(profile, history, factors: ScenarioFactors, entity_id=""):
    """Preference reasoning prompt.

    ``profile`` is either a ready description string or a MovieLens profile
    dict; ``history`` is a sequence of (title, category, rating) tuples,
    oldest first.
    """
    factors = _coerce_factors(factors)
    desc = profile if isinstance(profile, str) else describe_profile(profile)
    scen = factors.scenario
    lines = [f"Given a user profile: {desc}."]
    if history:
        lines.append(f"The user's {scen} viewing history over time is listed below.")
        for i, (title, category, rating) in enumerate(history, 1):
            lines.append(f"{i}. {title} ({category}), rated {rating}/5")
    else:
        lines.append(f"The user has no prior {scen} viewing history.")
    lines.append(f"Factors to consider: {factors.joined()}.")
    lines.append(
        f"Analyze the user's preferences on {scen}s with respect to each of the factors above. "
        "For every factor, state what the user likes or dislikes and give evidence from "
        "the profile and viewing history."
    )
    return PromptRequest(PromptKind.PREFERENCE, str(entity_id), "\n".join(lines) + "\n")


def build_item_prompt(item, factors: ScenarioFactors, entity_id=""):
    """Item factual prompt. ``item`` is a description string or a dict with
    ``title`` and optional ``genres``."""
    factors = _coerce_factors(factors)
    if isinstance(item, str):
        desc = item
    else:
        desc = item.get("title", "unknown")
        genres = item.get("genres")
        if genres:
            desc += f", categorized as {'/'.join(genres)}"
    scen = factors.scenario
    text = (
        f"Introduce the {scen} {desc}.\n"
        f"Describe its attributes with respect to each of the following factors: "
        f"{factors.joined()}.\n"
        "Be factual and concise; if a factor does not apply, say so.\n"
    )
    return PromptRequest(PromptKind.ITEM_FACTUAL, str(entity_id), text)
