"""Declarative inputs: platform profile, manifest, layout and permission map.

The platform profile supplies API stubs (types and method signatures the
apps compile against) together with security tags (SOURCE, SINK, NATIVE,
REFLECTION, SENSITIVE_MUTABLE, EXPENSIVE) and entry-point method names.
Manifest and layout are small XML subsets; the permission map follows the
``<permissionmap>`` schema with one element per permission.
"""

from __future__ import annotations

import json
import logging
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field

from .errors import LayoutError, ManifestError, PermissionMapError, ProfileError
from .graph import ProgramGraph
from .miniapp import ClassDecl, FieldDecl, MethodDecl, Param

log = logging.getLogger(__name__)

PRIORITY_MIN = -1000
PRIORITY_MAX = 2147483647

PROTECTION_LEVELS = frozenset({"normal", "dangerous", "signature", "signatureOrSystem"})

STUB_TAGS = frozenset({
    "NATIVE", "REFLECTION", "SOURCE", "SINK", "SENSITIVE_MUTABLE", "EXPENSIVE",
})


# -- platform profile -----------------------------------------------------------


@dataclass
class PlatformProfile:
    stubs: list[ClassDecl]
    tags: dict[str, set[str]]          # "Type.member" -> tag set
    entry_points: list[str]            # method names treated as roots

    def stub_names(self) -> set[str]:
        return {c.name for c in self.stubs}


def load_profile(text: str) -> PlatformProfile:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProfileError(f"profile is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ProfileError("profile root must be an object")

    stubs: list[ClassDecl] = []
    members: set[str] = set()
    for i, entry in enumerate(doc.get("stubs", [])):
        if not isinstance(entry, dict) or "name" not in entry:
            raise ProfileError(f"stubs[{i}] must be an object with a 'name'")
        decl = ClassDecl(name=entry["name"], extends=entry.get("extends"), is_stub=True)
        for f in entry.get("fields", []):
            decl.fields.append(FieldDecl(f["type"], f["name"], (0, 0)))
            members.add(f"{decl.name}.{f['name']}")
        for m in entry.get("methods", []):
            params = [Param(t, f"arg{k}") for k, t in enumerate(m.get("params", []))]
            decl.methods.append(MethodDecl(
                name=m["name"], return_type=m.get("returns", "void"),
                params=params, body=[], span=(0, 0), is_stub=True,
            ))
            members.add(f"{decl.name}.{m['name']}")
        stubs.append(decl)

    tags: dict[str, set[str]] = {}
    for signature, tag_list in doc.get("tags", {}).items():
        unknown = set(tag_list) - STUB_TAGS
        if unknown:
            raise ProfileError(f"unknown stub tags {sorted(unknown)} on {signature}")
        if signature not in members:
            raise ProfileError(f"tagged signature {signature!r} is not a declared stub member")
        tags[signature] = set(tag_list)

    entry_points = list(doc.get("entryPoints", []))
    return PlatformProfile(stubs=stubs, tags=tags, entry_points=entry_points)


# -- manifest ---------------------------------------------------------------------


@dataclass
class ManifestModel:
    package: str
    permissions: list[str] = field(default_factory=list)
    receivers: list[tuple[str, int]] = field(default_factory=list)  # (type, priority)


def parse_manifest(text: str) -> ManifestModel:
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        raise ManifestError(f"malformed manifest XML: {exc}") from None
    if root.tag != "manifest":
        raise ManifestError(f"expected <manifest> root, got <{root.tag}>")
    model = ManifestModel(package=root.get("package", ""))
    for child in root:
        if child.tag == "uses-permission":
            name = child.get("name")
            if not name:
                raise ManifestError("<uses-permission> requires a name attribute")
            model.permissions.append(name)
        elif child.tag == "application":
            _parse_application(child, model)
        else:
            log.warning("manifest: ignoring unknown element <%s>", child.tag)
    return model


def _parse_application(app: ET.Element, model: ManifestModel) -> None:
    for child in app:
        if child.tag != "receiver":
            log.warning("manifest: ignoring unknown element <%s>", child.tag)
            continue
        name = child.get("name")
        if not name:
            raise ManifestError("<receiver> requires a name attribute")
        priority = 0
        for sub in child:
            if sub.tag != "intent-filter":
                log.warning("manifest: ignoring unknown element <%s>", sub.tag)
                continue
            raw = sub.get("priority")
            if raw is None:
                continue
            try:
                priority = int(raw)
            except ValueError:
                raise ManifestError(f"priority {raw!r} is not an integer") from None
            if not PRIORITY_MIN <= priority <= PRIORITY_MAX:
                raise ManifestError(
                    f"priority {priority} outside [{PRIORITY_MIN}, {PRIORITY_MAX}]"
                )
        model.receivers.append((name, priority))


# -- layout -----------------------------------------------------------------------


def parse_layout(graph: ProgramGraph, text: str, path: str = "<layout>") -> list[tuple[str, str]]:
    """Add XML_ELEMENT nodes for a layout file.

    Elements nest via DECLARES edges (parent -> child). Returns the pending
    callback references [(element node id, handler method name)] for the
    xml-callbacks indexer to resolve once methods exist.
    """
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        raise LayoutError(f"malformed layout XML: {exc}") from None
    pending: list[tuple[str, str]] = []
    _add_element(graph, root, None, path, pending)
    return pending


def _add_element(graph, element, parent_id, path, pending) -> None:
    name = element.get("id") or element.tag
    attrs = {"tag": element.tag}
    attrs.update({k: v for k, v in element.attrib.items()})
    attrs["layout"] = path
    nid = graph.add_node("XML_ELEMENT", name, attrs)
    if parent_id is not None:
        graph.add_edge("DECLARES", parent_id, nid)
    handler = element.get("onClick")
    if handler:
        pending.append((nid, handler))
    for child in element:
        _add_element(graph, child, nid, path, pending)


# -- permission map ---------------------------------------------------------------


@dataclass
class PermissionMap:
    methods: dict[str, set[str]] = field(default_factory=dict)   # permission -> signatures
    protection: dict[str, str] = field(default_factory=dict)     # permission -> level
    groups: dict[str, str] = field(default_factory=dict)         # permission -> group

    def permissions_for(self, signature: str) -> list[str]:
        return sorted(p for p, sigs in self.methods.items() if signature in sigs)


def parse_permission_map(text: str) -> PermissionMap:
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        raise PermissionMapError(f"malformed permission map XML: {exc}") from None
    if root.tag != "permissionmap":
        raise PermissionMapError(f"expected <permissionmap> root, got <{root.tag}>")
    pmap = PermissionMap()
    for element in root:
        if element.tag != "permission":
            log.warning("permission map: ignoring unknown element <%s>", element.tag)
            continue
        name = element.get("name")
        if not name:
            raise PermissionMapError("<permission> requires a name attribute")
        if name in pmap.methods:
            log.warning("permission map: duplicate permission %s; unioning methods", name)
        sigs = pmap.methods.setdefault(name, set())
        for method in element:
            if method.tag != "method":
                log.warning("permission map: ignoring unknown element <%s>", method.tag)
                continue
            signature = method.get("signature")
            if not signature or "." not in signature:
                raise PermissionMapError(
                    f"method signature {signature!r} must look like Type.method"
                )
            sigs.add(signature)
        level = element.get("protectionLevel")
        if level is not None:
            if level not in PROTECTION_LEVELS:
                raise PermissionMapError(
                    f"protection level {level!r} not in {sorted(PROTECTION_LEVELS)}"
                )
            pmap.protection[name] = level
        group = element.get("group")
        if group is not None:
            pmap.groups[name] = group
    return pmap
