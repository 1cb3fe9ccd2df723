"""Per-language wiki configuration: featured templates, excluded sections, citation templates.

Defaults for the ten supported language editions ship in ``data/languages.json``.
The file is a JSON object keyed by wiki language code; each value holds three
string lists: ``featured_templates``, ``excluded_sections`` and
``citation_templates``. Section titles and template names are matched after
normalization (markup stripped, whitespace collapsed, lowercased), so the
lists may be written in any case. The shipped section and template lists are
best-effort approximations of each wiki's conventions and can be replaced
wholesale by pointing the loader at another file.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources

from .errors import UnknownLanguage

_WS_RUN = re.compile(r"[\s_]+")


def normalize_name(name: str) -> str:
    """Canonical form used for title and template-name comparisons."""
    return _WS_RUN.sub(" ", name).strip().lower()


@dataclass(frozen=True)
class LangConfig:
    lang: str
    featured_templates: tuple[str, ...]
    excluded_sections: frozenset[str]
    citation_templates: frozenset[str]

    @classmethod
    def from_dict(cls, lang: str, raw: dict) -> "LangConfig":
        return cls(
            lang=lang,
            featured_templates=tuple(
                normalize_name(t) for t in raw.get("featured_templates", [])
            ),
            excluded_sections=frozenset(
                normalize_name(s) for s in raw.get("excluded_sections", [])
            ),
            citation_templates=frozenset(
                normalize_name(t) for t in raw.get("citation_templates", [])
            ),
        )


def load_language_configs(path: str | None = None) -> dict[str, LangConfig]:
    """Load all language configs, from ``path`` or the packaged defaults."""
    if path is None:
        text = resources.files("refneed.data").joinpath("languages.json").read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    raw = json.loads(text)
    return {lang: LangConfig.from_dict(lang, entry) for lang, entry in raw.items()}


_DEFAULTS: dict[str, LangConfig] | None = None


def default_configs() -> dict[str, LangConfig]:
    global _DEFAULTS
    if _DEFAULTS is None:
        _DEFAULTS = load_language_configs()
    return _DEFAULTS


def get_config(lang: str, configs: dict[str, LangConfig] | None = None) -> LangConfig:
    """Config for one language code; raises UnknownLanguage if unconfigured."""
    table = configs if configs is not None else default_configs()
    try:
        return table[lang]
    except KeyError:
        raise UnknownLanguage(lang) from None


def supported_languages(configs: dict[str, LangConfig] | None = None) -> list[str]:
    table = configs if configs is not None else default_configs()
    return sorted(table)
