"""Tokenization of post text.

Every component that looks at post text (classification features,
gazetteer name matching, corpus validation) goes through `tokenize` so
they all agree on token boundaries.
"""

import re

URL_TOKEN = "<url>"

# One pass over the text, earliest-match-wins:
#   - http(s) URLs collapse to a single placeholder token
#   - @mentions are dropped (third-party handles must not leak into features)
#   - #hashtag bodies survive as one token, '#' stripped
#   - everything else splits into maximal Unicode-alphanumeric runs
#     (underscore is treated as a separator, not a word character)
_TOKEN_RE = re.compile(
    r"(?P<url>https?://\S+)"
    r"|(?P<mention>@\w+)"
    r"|(?P<hashtag>#\w+)"
    r"|(?P<word>[^\W_]+)",
    re.UNICODE,
)


def tokenize(text: str) -> list[str]:
    """Lowercase and split `text` into tokens.

    Empty or whitespace-only input yields an empty list.
    """
    tokens: list[str] = []
    for match in _TOKEN_RE.finditer(text.lower()):
        kind = match.lastgroup
        if kind == "url":
            tokens.append(URL_TOKEN)
        elif kind == "hashtag":
            tokens.append(match.group("hashtag")[1:])
        elif kind == "word":
            tokens.append(match.group("word"))
        # mentions are dropped
    return tokens
