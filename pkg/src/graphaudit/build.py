"""Lowers parsed MiniApp units plus platform stubs into a program graph.

Construction rules:
  - TYPE/METHOD/FIELD/VARIABLE nodes with DECLARES containment edges
    (type -> member, method -> parameter/local/call-site/literal).
  - EXTENDS (subtype -> supertype), OVERRIDES (overriding -> nearest
    overridden by name and arity), TYPE_OF (value node -> declared type).
  - CALL edges method -> method for every dispatch-compatible target under
    class-hierarchy analysis; call sites are CALLSITE_RESULT nodes listed in
    the edge's "sites" attribute.
  - DATA_FLOW, flow- and context-insensitive: assignment rhs -> lhs,
    argument -> parameter and return expression -> call-site result for every
    CHA-feasible callee, write value -> field, field -> use on reads.
  - CONTROL_FLOW over call-site events in intra-method execution order,
    with branch joins and loop back edges; the METHOD node is the entry.

Node ids are assigned sequentially in visit order, so identical inputs
produce identical exports.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import InheritanceCycleError, NameResolutionError
from .graph import ProgramGraph, TAG_PLATFORM
from .miniapp import (
    Assign, Call, ClassDecl, Expr, ExprStmt, FieldRead, If, Literal,
    MethodDecl, MiniAppUnit, New, Return, VarDecl, VarRef, While,
)
from .resources import PlatformProfile


@dataclass
class _FieldInfo:
    node_id: str
    type_name: str
    owner: str


@dataclass
class _MethodInfo:
    node_id: str
    decl: MethodDecl
    owner: str
    param_ids: list[str] = field(default_factory=list)
    return_values: list[str] = field(default_factory=list)

    @property
    def arity(self) -> int:
        return len(self.decl.params)


@dataclass
class _TypeInfo:
    decl: ClassDecl
    node_id: str = ""
    fields: dict[str, _FieldInfo] = field(default_factory=dict)
    methods: dict[tuple[str, int], _MethodInfo] = field(default_factory=dict)


@dataclass
class _CallSite:
    node_id: str
    caller: _MethodInfo
    receiver_type: str
    name: str
    args: list[str]
    span: tuple[str, int, int]


@dataclass
class _NewSite:
    node_id: str
    caller: _MethodInfo
    type_name: str


class GraphBuilder:
    """Single-use builder; call build() once."""

    def __init__(self, profile: PlatformProfile):
        self.profile = profile
        self.graph = ProgramGraph()
        self.types: dict[str, _TypeInfo] = {}
        self.children: dict[str, list[str]] = {}
        self.call_sites: list[_CallSite] = []
        self.new_sites: list[_NewSite] = []
        self._df_seen: set[tuple[str, str]] = set()
        self._cf_seen: set[tuple[str, str]] = set()
        self._unit: MiniAppUnit | None = None
        self._event_log: list[str] = []  # call-site ids in creation order

    def build(self, units: list[MiniAppUnit]) -> ProgramGraph:
        classes: list[tuple[ClassDecl, MiniAppUnit | None]] = [
            (decl, None) for decl in self.profile.stubs
        ]
        for unit in units:
            classes.extend((decl, unit) for decl in unit.classes)

        for decl, unit in classes:
            if decl.name in self.types:
                raise NameResolutionError(f"duplicate type name {decl.name!r}")
            self.types[decl.name] = _TypeInfo(decl=decl)

        self._check_hierarchy()
        for decl, _ in classes:
            self._declare_type(decl)
        for decl, unit in classes:
            self._declare_members(decl, unit)
        self._add_overrides()
        for decl, unit in classes:
            if not decl.is_stub:
                self._unit = unit
                for method in decl.methods:
                    self._walk_method(self.types[decl.name], method)
        self._wire_calls()
        self._apply_stub_tags()
        return self.graph

    # -- declarations -------------------------------------------------------

    def _check_hierarchy(self) -> None:
        for name, info in self.types.items():
            super_name = info.decl.extends
            if super_name is not None and super_name not in self.types:
                raise NameResolutionError(
                    f"type {name!r} extends unknown type {super_name!r}"
                )
            if super_name is not None:
                self.children.setdefault(super_name, []).append(name)
        for name in self.types:
            seen = set()
            cursor: str | None = name
            while cursor is not None:
                if cursor in seen:
                    raise InheritanceCycleError(f"inheritance cycle through {cursor!r}")
                seen.add(cursor)
                cursor = self.types[cursor].decl.extends

    def _declare_type(self, decl: ClassDecl) -> None:
        info = self.types[decl.name]
        info.node_id = self.graph.add_node("TYPE", decl.name, {"kind": "class"})

    def _declare_members(self, decl: ClassDecl, unit: MiniAppUnit | None) -> None:
        info = self.types[decl.name]
        g = self.graph
        if decl.extends is not None:
            g.add_edge("EXTENDS", info.node_id, self.types[decl.extends].node_id)
        for f in decl.fields:
            if f.type_name not in self.types:
                raise NameResolutionError(
                    f"field {decl.name}.{f.name} has unknown type {f.type_name!r}"
                )
            fid = g.add_node("FIELD", f.name, {
                "dataType": f.type_name,
                "signature": f"{decl.name}.{f.name}",
            }, span=self._member_span(unit, f.span))
            g.add_edge("DECLARES", info.node_id, fid)
            g.add_edge("TYPE_OF", fid, self.types[f.type_name].node_id)
            info.fields[f.name] = _FieldInfo(fid, f.type_name, decl.name)
        for m in decl.methods:
            key = (m.name, len(m.params))
            if key in info.methods:
                raise NameResolutionError(
                    f"duplicate method {decl.name}.{m.name}/{len(m.params)}"
                )
            mid = g.add_node("METHOD", m.name, {
                "arity": len(m.params),
                "returns": m.return_type,
                "signature": f"{decl.name}.{m.name}",
            }, span=self._member_span(unit, m.span))
            g.add_edge("DECLARES", info.node_id, mid)
            minfo = _MethodInfo(node_id=mid, decl=m, owner=decl.name)
            for index, param in enumerate(m.params):
                if param.type_name not in self.types:
                    raise NameResolutionError(
                        f"parameter {param.name} of {decl.name}.{m.name} has "
                        f"unknown type {param.type_name!r}"
                    )
                pid = g.add_node("VARIABLE", param.name, {
                    "dataType": param.type_name,
                    "varKind": "param",
                    "index": index,
                    "method": f"{decl.name}.{m.name}",
                })
                g.add_edge("DECLARES", mid, pid)
                g.add_edge("TYPE_OF", pid, self.types[param.type_name].node_id)
                minfo.param_ids.append(pid)
            info.methods[key] = minfo

    def _add_overrides(self) -> None:
        for info in self.types.values():
            for (name, arity), minfo in info.methods.items():
                ancestor = self.types[info.decl.name].decl.extends
                while ancestor is not None:
                    over = self.types[ancestor].methods.get((name, arity))
                    if over is not None:
                        self.graph.add_edge("OVERRIDES", minfo.node_id, over.node_id)
                        break
                    ancestor = self.types[ancestor].decl.extends

    # -- method bodies ------------------------------------------------------

    def _walk_method(self, owner: _TypeInfo, decl: MethodDecl) -> None:
        minfo = owner.methods[(decl.name, len(decl.params))]
        scope: dict[str, tuple[str, str]] = {  # name -> (node id, static type)
            p.name: (minfo.param_ids[i], p.type_name)
            for i, p in enumerate(decl.params)
        }
        preds = self._walk_body(decl.body, {minfo.node_id}, owner, minfo, scope)
        del preds  # method exit; nothing to wire

    def _walk_body(self, stmts, preds: set[str], owner, minfo, scope) -> set[str]:
        for stmt in stmts:
            preds = self._walk_stmt(stmt, preds, owner, minfo, scope)
        return preds

    def _walk_stmt(self, stmt, preds, owner, minfo, scope) -> set[str]:
        g = self.graph
        if isinstance(stmt, VarDecl):
            if stmt.type_name not in self.types:
                raise self._name_error(
                    f"unknown type {stmt.type_name!r}", stmt.span)
            if stmt.name in scope:
                raise self._name_error(
                    f"duplicate local {stmt.name!r}", stmt.span)
            vid = g.add_node("VARIABLE", stmt.name, {
                "dataType": stmt.type_name,
                "varKind": "local",
                "method": f"{minfo.owner}.{minfo.decl.name}",
            }, span=self._stmt_span(stmt.span))
            g.add_edge("DECLARES", minfo.node_id, vid)
            g.add_edge("TYPE_OF", vid, self.types[stmt.type_name].node_id)
            scope[stmt.name] = (vid, stmt.type_name)
            events: list[str] = []
            if stmt.init is not None:
                value = self._walk_expr(stmt.init, owner, minfo, scope, events)
                self._data_flow(value, vid, "assign")
            return self._wire_chain(preds, events)
        if isinstance(stmt, Assign):
            events = []
            value = self._walk_expr(stmt.value, owner, minfo, scope, events)
            target = self._resolve_target(stmt, owner, minfo, scope)
            self._data_flow(value, target, "write" if stmt.target_owner else "assign")
            return self._wire_chain(preds, events)
        if isinstance(stmt, ExprStmt):
            events = []
            self._walk_expr(stmt.expr, owner, minfo, scope, events)
            return self._wire_chain(preds, events)
        if isinstance(stmt, Return):
            events = []
            if stmt.value is not None:
                value = self._walk_expr(stmt.value, owner, minfo, scope, events)
                minfo.return_values.append(value)
            self._wire_chain(preds, events)
            return set()
        if isinstance(stmt, If):
            events = []
            self._walk_expr(stmt.cond, owner, minfo, scope, events)
            after_cond = self._wire_chain(preds, events)
            then_out = self._walk_body(stmt.then_body, set(after_cond), owner, minfo, dict(scope))
            else_out = self._walk_body(stmt.else_body, set(after_cond), owner, minfo, dict(scope))
            return then_out | else_out
        if isinstance(stmt, While):
            events = []
            self._walk_expr(stmt.cond, owner, minfo, scope, events)
            after_cond = self._wire_chain(preds, events)
            mark = len(self._event_log)
            body_out = self._walk_body(stmt.body, set(after_cond), owner, minfo, dict(scope))
            body_events = self._event_log[mark:]
            head = events[0] if events else (body_events[0] if body_events else None)
            if head is not None:
                for p in body_out:
                    self._control_flow(p, head)
            if events:
                return after_cond
            return after_cond | body_out
        raise AssertionError(f"unhandled statement {stmt!r}")

    def _walk_expr(self, expr: Expr, owner, minfo, scope, events: list[str]) -> str:
        """Create value nodes for an expression; returns its value node id."""
        g = self.graph
        if isinstance(expr, Literal):
            nid = g.add_node("LITERAL", expr.value, {
                "literalType": expr.kind,
                "value": expr.value,
            }, span=self._stmt_span(expr.span))
            g.add_edge("DECLARES", minfo.node_id, nid)
            if expr.kind != "null" and expr.kind in ("int", "string", "boolean"):
                type_name = {"int": "int", "string": "String", "boolean": "boolean"}[expr.kind]
                if type_name in self.types:
                    g.add_edge("TYPE_OF", nid, self.types[type_name].node_id)
            return nid
        if isinstance(expr, VarRef):
            if expr.name in scope:
                return scope[expr.name][0]
            finfo = self._lookup_field(owner.decl.name, expr.name)
            if finfo is not None:
                return finfo.node_id
            raise self._name_error(f"unknown name {expr.name!r}", expr.span)
        if isinstance(expr, FieldRead):
            owner_type = self._owner_type(expr.owner, owner, scope, expr.span)
            finfo = self._lookup_field(owner_type, expr.name)
            if finfo is None:
                raise self._name_error(
                    f"type {owner_type!r} has no field {expr.name!r}", expr.span)
            return finfo.node_id
        if isinstance(expr, New):
            if expr.type_name not in self.types:
                raise self._name_error(f"unknown type {expr.type_name!r}", expr.span)
            for arg in expr.args:
                self._walk_expr(arg, owner, minfo, scope, events)
            nid = g.add_node("CALLSITE_RESULT", expr.type_name, {
                "callKind": "new",
                "callee": expr.type_name,
                "arity": len(expr.args),
                "method": f"{minfo.owner}.{minfo.decl.name}",
            }, span=self._stmt_span(expr.span))
            g.add_edge("DECLARES", minfo.node_id, nid)
            g.add_edge("TYPE_OF", nid, self.types[expr.type_name].node_id)
            self.new_sites.append(_NewSite(nid, minfo, expr.type_name))
            events.append(nid)
            self._event_log.append(nid)
            return nid
        if isinstance(expr, Call):
            arg_values = [
                self._walk_expr(arg, owner, minfo, scope, events) for arg in expr.args
            ]
            receiver_type = (
                owner.decl.name if expr.receiver in (None, "this")
                else self._owner_type(expr.receiver, owner, scope, expr.span)
            )
            nid = g.add_node("CALLSITE_RESULT", expr.name, {
                "callKind": "call",
                "callee": expr.name,
                "arity": len(expr.args),
                "receiverType": receiver_type,
                "method": f"{minfo.owner}.{minfo.decl.name}",
            }, span=self._stmt_span(expr.span))
            g.add_edge("DECLARES", minfo.node_id, nid)
            self.call_sites.append(_CallSite(
                nid, minfo, receiver_type, expr.name, arg_values,
                self._stmt_span(expr.span),
            ))
            events.append(nid)
            self._event_log.append(nid)
            return nid
        raise AssertionError(f"unhandled expression {expr!r}")

    # -- late wiring ----------------------------------------------------------

    def _wire_calls(self) -> None:
        g = self.graph
        call_edges: dict[tuple[str, str], str] = {}
        inst_edges: dict[tuple[str, str], str] = {}
        for site in self.call_sites:
            targets = self._dispatch_targets(site.receiver_type, site.name, len(site.args))
            if not targets:
                raise NameResolutionError(
                    f"no method {site.name}/{len(site.args)} reachable from "
                    f"type {site.receiver_type!r} (in {site.caller.owner}."
                    f"{site.caller.decl.name})"
                )
            for target in targets:
                key = (site.caller.node_id, target.node_id)
                eid = call_edges.get(key)
                if eid is None:
                    eid = g.add_edge("CALL", site.caller.node_id, target.node_id, {
                        "sites": site.node_id,
                        "siteCount": 1,
                    })
                    call_edges[key] = eid
                else:
                    edge = g.edges[eid]
                    sites = str(edge.attrs["sites"]).split(",")
                    if site.node_id not in sites:
                        sites.append(site.node_id)
                        g.set_attr(eid, "sites", ",".join(sites))
                        g.set_attr(eid, "siteCount", len(sites))
                for i, arg in enumerate(site.args):
                    self._data_flow(arg, target.param_ids[i], "arg")
                for rv in target.return_values:
                    self._data_flow(rv, site.node_id, "return")
            first = targets[0]
            if first.decl.return_type != "void" and first.decl.return_type in self.types:
                g.add_edge("TYPE_OF", site.node_id,
                           self.types[first.decl.return_type].node_id)
        for site in self.new_sites:
            key = (site.caller.node_id, site.type_name)
            if key not in inst_edges:
                inst_edges[key] = g.add_edge(
                    "INSTANTIATES", site.caller.node_id,
                    self.types[site.type_name].node_id, {"sites": site.node_id})
            else:
                eid = inst_edges[key]
                sites = str(g.edges[eid].attrs["sites"]).split(",")
                if site.node_id not in sites:
                    sites.append(site.node_id)
                    g.set_attr(eid, "sites", ",".join(sites))

    def _dispatch_targets(self, receiver_type: str, name: str, arity: int) -> list[_MethodInfo]:
        """Class-hierarchy analysis: resolve, from every subtype of the
        static receiver type, the implementation a call would bind to."""
        targets: list[_MethodInfo] = []
        seen: set[str] = set()
        for subtype in self._subtypes_incl(receiver_type):
            resolved = self._resolve_method(subtype, name, arity)
            if resolved is not None and resolved.node_id not in seen:
                seen.add(resolved.node_id)
                targets.append(resolved)
        return targets

    def _subtypes_incl(self, type_name: str) -> list[str]:
        out, stack = [], [type_name]
        while stack:
            cursor = stack.pop()
            out.append(cursor)
            stack.extend(reversed(self.children.get(cursor, ())))
        return out

    def _resolve_method(self, type_name: str, name: str, arity: int) -> _MethodInfo | None:
        cursor: str | None = type_name
        while cursor is not None:
            hit = self.types[cursor].methods.get((name, arity))
            if hit is not None:
                return hit
            cursor = self.types[cursor].decl.extends
        return None

    def _apply_stub_tags(self) -> None:
        g = self.graph
        for info in self.types.values():
            if not info.decl.is_stub:
                continue
            g.apply_tag([info.node_id], TAG_PLATFORM)
            for finfo in info.fields.values():
                g.apply_tag([finfo.node_id], TAG_PLATFORM)
            for minfo in info.methods.values():
                g.apply_tag([minfo.node_id], TAG_PLATFORM)
        for signature, tags in self.profile.tags.items():
            type_name, member = signature.split(".", 1)
            info = self.types.get(type_name)
            if info is None:
                continue
            target = None
            if member in info.fields:
                target = info.fields[member].node_id
            else:
                for (name, _), minfo in info.methods.items():
                    if name == member:
                        target = minfo.node_id
                        break
            if target is not None:
                for tag in sorted(tags):
                    g.apply_tag([target], tag)

    # -- helpers ---------------------------------------------------------------

    def _resolve_target(self, stmt: Assign, owner, minfo, scope) -> str:
        if stmt.target_owner is None:
            if stmt.target_name not in scope:
                raise self._name_error(
                    f"unknown variable {stmt.target_name!r}", stmt.span)
            return scope[stmt.target_name][0]
        owner_type = self._owner_type(stmt.target_owner, owner, scope, stmt.span)
        finfo = self._lookup_field(owner_type, stmt.target_name)
        if finfo is None:
            raise self._name_error(
                f"type {owner_type!r} has no field {stmt.target_name!r}", stmt.span)
        return finfo.node_id

    def _owner_type(self, owner_name: str, owner, scope, span) -> str:
        if owner_name == "this":
            return owner.decl.name
        if owner_name in scope:
            return scope[owner_name][1]
        finfo = self._lookup_field(owner.decl.name, owner_name)
        if finfo is not None:
            return finfo.type_name
        raise self._name_error(f"unknown name {owner_name!r}", span)

    def _lookup_field(self, type_name: str, field_name: str) -> _FieldInfo | None:
        cursor: str | None = type_name
        while cursor is not None:
            info = self.types[cursor]
            if field_name in info.fields:
                return info.fields[field_name]
            cursor = info.decl.extends
        return None

    def _data_flow(self, src: str, dst: str, role: str) -> None:
        if (src, dst) in self._df_seen:
            return
        self._df_seen.add((src, dst))
        self.graph.add_edge("DATA_FLOW", src, dst, {"role": role})

    def _control_flow(self, src: str, dst: str) -> None:
        if (src, dst) in self._cf_seen:
            return
        self._cf_seen.add((src, dst))
        self.graph.add_edge("CONTROL_FLOW", src, dst)

    def _wire_chain(self, preds: set[str], events: list[str]) -> set[str]:
        for event in events:
            for p in preds:
                self._control_flow(p, event)
            preds = {event}
        return preds

    def _name_error(self, message: str, span) -> NameResolutionError:
        if self._unit is not None:
            text = self._unit.text
            offset = span[0]
            line = text.count("\n", 0, offset) + 1
            column = offset - (text.rfind("\n", 0, offset) + 1) + 1
            return NameResolutionError(f"{self._unit.path}:{line}:{column}: {message}")
        return NameResolutionError(message)

    def _member_span(self, unit: MiniAppUnit | None, span) -> tuple[str, int, int] | None:
        if unit is None:
            return None
        return (unit.path, span[0], span[1])

    def _stmt_span(self, span) -> tuple[str, int, int]:
        assert self._unit is not None
        return (self._unit.path, span[0], span[1])


def build_graph(units: list[MiniAppUnit], profile: PlatformProfile) -> ProgramGraph:
    """Construct the (unfrozen) program graph for a set of parsed units."""
    return GraphBuilder(profile).build(units)
