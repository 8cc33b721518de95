"""SVG rendering of pre-fold grids and folded bi-linear layouts."""

from __future__ import annotations

import xml.etree.ElementTree as ET

from .layout import PhysicalLayout, Role, ValidationError, crossing_pairs

SVG_NS = "http://www.w3.org/2000/svg"

ROLE_COLORS = {
    Role.DATA: "#f28e2b",
    Role.SYNDROME_X: "#4e79a7",
    Role.SYNDROME_Z: "#59a14f",
}
SPACER_COLOR = "#e15759"

PITCH = 40.0
RAIL_GAP = 160.0
MARGIN = 40.0
RADIUS = 9.0


def _positions(layout: PhysicalLayout, folded: bool) -> dict[int, tuple[float, float]]:
    if folded:
        return {
            q.id: (MARGIN + q.folded_pos[1] * PITCH, MARGIN + q.folded_pos[0] * RAIL_GAP)
            for q in layout.qubits
        }
    return {
        q.id: (MARGIN + q.grid_pos[1] * PITCH, MARGIN + q.grid_pos[0] * PITCH)
        for q in layout.qubits
    }


def _intersection(p1, p2, p3, p4) -> tuple[float, float]:
    (x1, y1), (x2, y2), (x3, y3), (x4, y4) = p1, p2, p3, p4
    den = (x1 - x2) * (y3 - y4) - (y1 - y2) * (x3 - x4)
    t = ((x1 - x3) * (y3 - y4) - (y1 - y3) * (x3 - x4)) / den
    return x1 + t * (x2 - x1), y1 + t * (y2 - y1)


def _column_regions(layout: PhysicalLayout) -> list[tuple[str, int, list[int]]]:
    """Group qubit ids by logical block / spacer column: (kind, index, ids)."""
    spec = layout.spec
    groups: dict[tuple[str, int], list[int]] = {}
    for q in layout.qubits:
        col = q.grid_pos[1]
        block = spec.block_of_column(col)
        key = ("spacer", col // (spec.M + 1)) if block is None else ("logical-block", block)
        groups.setdefault(key, []).append(q.id)
    return [(kind, idx, ids) for (kind, idx), ids in sorted(groups.items())]


def emit_svg(layout: PhysicalLayout, folded: bool | None = None) -> str:
    """Render a layout as an SVG document.

    One ``circle.qubit`` per qubit, one ``polyline.resonator`` per coupler and,
    for folded layouts, one ``path.airbridge`` per bridged crossing.  Logical
    blocks and spacer columns are outlined with ``rect`` elements.
    """
    if not layout.qubits:
        raise ValidationError("cannot render an empty layout")
    if folded is None:
        folded = layout.is_folded
    elif folded and not layout.is_folded:
        raise ValidationError("folded rendering needs folded_pos on every qubit")

    pos = _positions(layout, folded)
    width = max(x for x, _ in pos.values()) + MARGIN
    height = max(y for _, y in pos.values()) + MARGIN

    ET.register_namespace("", SVG_NS)
    root = ET.Element(
        f"{{{SVG_NS}}}svg",
        {
            "width": f"{width:g}",
            "height": f"{height:g}",
            "viewBox": f"0 0 {width:g} {height:g}",
            "data-folded": str(folded).lower(),
        },
    )
    ET.SubElement(root, f"{{{SVG_NS}}}title").text = (
        f"d={layout.spec.d} N={layout.spec.N} {layout.spec.encoding.value} "
        f"({'folded' if folded else 'grid'})"
    )

    regions = ET.SubElement(root, f"{{{SVG_NS}}}g", {"id": "regions"})
    for kind, idx, ids in _column_regions(layout):
        xs = [pos[i][0] for i in ids]
        ys = [pos[i][1] for i in ids]
        pad = RADIUS + 4
        color = SPACER_COLOR if kind == "spacer" else "#bab0ac"
        ET.SubElement(
            regions,
            f"{{{SVG_NS}}}rect",
            {
                "class": kind,
                "data-index": str(idx),
                "x": f"{min(xs) - pad:g}",
                "y": f"{min(ys) - pad:g}",
                "width": f"{max(xs) - min(xs) + 2 * pad:g}",
                "height": f"{max(ys) - min(ys) + 2 * pad:g}",
                "fill": color,
                "fill-opacity": "0.15",
                "stroke": color,
            },
        )

    wires = ET.SubElement(root, f"{{{SVG_NS}}}g", {"id": "resonators"})
    for n, res in enumerate(layout.resonators):
        (x1, y1), (x2, y2) = pos[res.endpoints[0]], pos[res.endpoints[1]]
        attrs = {
            "class": "resonator" if res.active else "resonator inactive",
            "data-index": str(n),
            "data-crossings": str(res.crossings),
            "points": f"{x1:g},{y1:g} {x2:g},{y2:g}",
            "fill": "none",
            "stroke": "#555" if res.active else "#aaa",
            "stroke-width": "2",
        }
        if res.frequency is not None:
            attrs["data-frequency-hz"] = f"{res.frequency:.6g}"
        ET.SubElement(wires, f"{{{SVG_NS}}}polyline", attrs)

    if folded:
        bridges = ET.SubElement(root, f"{{{SVG_NS}}}g", {"id": "airbridges"})
        for i, j, bridged in crossing_pairs(layout):
            ends_i = [pos[e] for e in layout.resonators[i].endpoints]
            ends_j = [pos[e] for e in layout.resonators[j].endpoints]
            x, y = _intersection(*ends_i, *ends_j)
            s = 5.0
            ET.SubElement(
                bridges,
                f"{{{SVG_NS}}}path",
                {
                    "class": "airbridge",
                    "data-resonator": str(bridged),
                    "d": f"M {x - s:g} {y:g} A {s:g} {s:g} 0 0 1 {x + s:g} {y:g}",
                    "fill": "none",
                    "stroke": "#000",
                },
            )

    nodes = ET.SubElement(root, f"{{{SVG_NS}}}g", {"id": "qubits"})
    for q in layout.qubits:
        x, y = pos[q.id]
        ET.SubElement(
            nodes,
            f"{{{SVG_NS}}}circle",
            {
                "class": f"qubit {q.role.value}" + (" spacer" if q.spacer else ""),
                "data-id": str(q.id),
                "cx": f"{x:g}",
                "cy": f"{y:g}",
                "r": f"{RADIUS:g}",
                "fill": SPACER_COLOR if q.spacer else ROLE_COLORS[q.role],
            },
        )

    return ET.tostring(root, encoding="unicode", xml_declaration=False)
