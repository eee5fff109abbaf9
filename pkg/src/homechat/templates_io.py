"""Loading of prompt template assets.

Templates ship with the package as plain-text files with ``{placeholder}``
slots and can be overridden wholesale by pointing ``--templates`` at a
directory containing files with the same names.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from .model import HomechatError


class MissingTemplateAsset(HomechatError):
    pass


ASSET_NAMES = (
    "init_context.txt",
    "pre_act_format.txt",
    "question_format.txt",
    "question_format_alt.txt",
)


def load_template(name: str, directory: str | Path | None = None) -> str:
    """Return the template text, from `directory` if given, else the package asset."""
    if directory is not None:
        path = Path(directory) / name
        if not path.is_file():
            raise MissingTemplateAsset(f"template {name} not found in {directory}")
        return path.read_text(encoding="utf-8")
    try:
        ref = resources.files("homechat.templates") / name
        return ref.read_text(encoding="utf-8")
    except (FileNotFoundError, ModuleNotFoundError):
        raise MissingTemplateAsset(f"packaged template asset {name} missing") from None
