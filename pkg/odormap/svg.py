"""
Minimal deterministic SVG 1.1 writer.
Attributes keep insertion order and numbers use a fixed format, so equal
inputs give byte-identical documents.
"""

from __future__ import annotations

from typing import Any, Optional
from xml.sax.saxutils import escape, quoteattr


def fmt_num(value: float) -> str:
    text = f"{value:.2f}"
    if "." in text:
        text = text.rstrip("0").rstrip(".")
    return "0" if text in ("-0", "") else text


def _attr_value(value: Any) -> str:
    if isinstance(value, float):
        return fmt_num(value)
    return str(value)


class Element:
    tag = "g"

    def __init__(self, *children: "Element | str", tag: Optional[str] = None, **attrs: Any):
        if tag is not None:
            self.tag = tag
        self.children: list[Element | str] = list(children)
        # python keywords and dashes: class_ -> class, font_size -> font-size
        self.attrs = {k.rstrip("_").replace("_", "-"): v for k, v in attrs.items() if v is not None}

    def add(self, child: "Element | str") -> "Element | str":
        self.children.append(child)
        return child

    def render(self, indent: int = 0) -> str:
        pad = "  " * indent
        attrs = "".join(f" {k}={quoteattr(_attr_value(v))}" for k, v in self.attrs.items())
        if not self.children:
            return f"{pad}<{self.tag}{attrs}/>"
        if all(isinstance(c, str) for c in self.children):
            text = "".join(escape(c) for c in self.children)
            return f"{pad}<{self.tag}{attrs}>{text}</{self.tag}>"
        inner = "\n".join(
            c.render(indent + 1) if isinstance(c, Element) else f"{pad}  {escape(c)}"
            for c in self.children
        )
        return f"{pad}<{self.tag}{attrs}>\n{inner}\n{pad}</{self.tag}>"


class Svg(Element):
    tag = "svg"

    def __init__(self, width: float, height: float, *children: Element):
        super().__init__(
            *children,
            xmlns="http://www.w3.org/2000/svg",
            version="1.1",
            width=float(width),
            height=float(height),
            viewBox=f"0 0 {fmt_num(width)} {fmt_num(height)}",
        )

    def document(self) -> str:
        return '<?xml version="1.0" encoding="UTF-8"?>\n' + self.render() + "\n"


class Circle(Element):
    tag = "circle"

    def __init__(self, x: float, y: float, r: float, **attrs: Any):
        super().__init__(cx=float(x), cy=float(y), r=float(r), **attrs)


class Line(Element):
    tag = "line"

    def __init__(self, x1: float, y1: float, x2: float, y2: float, **attrs: Any):
        super().__init__(x1=float(x1), y1=float(y1), x2=float(x2), y2=float(y2), **attrs)


class Path(Element):
    tag = "path"

    def __init__(self, *commands: tuple, **attrs: Any):
        d = " ".join(
            cmd[0] + " ".join(fmt_num(float(v)) for v in cmd[1:]) for cmd in commands
        )
        super().__init__(d=d, **attrs)


class Rect(Element):
    tag = "rect"

    def __init__(self, x: float, y: float, w: float, h: float, **attrs: Any):
        super().__init__(x=float(x), y=float(y), width=float(w), height=float(h), **attrs)


class Text(Element):
    tag = "text"

    def __init__(self, text: str, x: float, y: float, **attrs: Any):
        super().__init__(str(text), x=float(x), y=float(y), **attrs)
