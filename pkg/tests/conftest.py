"""Shared hypothesis strategies: random element trees and snapshot graphs."""

from hypothesis import strategies as st

from pinalite.screens import AppContext, UiElement, build_graph

CTX = AppContext("com.example.app", "MainActivity")

texts = st.one_of(st.none(), st.text(min_size=0, max_size=12))
flags = st.booleans()


@st.composite
def element_trees(draw, depth=0):
    """A random tree node spec (dict form, children as nested specs)."""
    x1 = draw(st.integers(0, 500))
    y1 = draw(st.integers(0, 500))
    w = draw(st.integers(0, 300))
    h = draw(st.integers(0, 300))
    n_children = 0 if depth >= 3 else draw(st.integers(0, 3))
    children = tuple(draw(element_trees(depth=depth + 1)) for _ in range(n_children))
    return dict(
        class_name=draw(st.sampled_from(["TextView", "Button", "ListView", "FrameLayout"])),
        text=draw(texts),
        content_description=draw(texts),
        view_id=draw(st.one_of(st.none(), st.from_regex(r"id/[a-z]{1,8}", fullmatch=True))),
        bounds=(x1, y1, x1 + w, y1 + h),
        clickable=draw(flags),
        scrollable=draw(flags),
        focused=draw(flags),
        enabled=draw(flags),
        children=children,
    )


def materialize(spec, counter):
    """Turn a tree spec into UiElements with depth-first e{n} ids."""
    eid = f"e{counter[0]}"
    counter[0] += 1
    kids = tuple(materialize(c, counter) for c in spec["children"])
    return UiElement(element_id=eid, **{**spec, "children": kids})


@st.composite
def snapshot_graphs(draw):
    root = materialize(draw(element_trees()), [0])
    return build_graph(root, CTX)
