"""Corpus preprocessing: strip non-essential content, filter non-flat
models, and rename identifiers to compact sequential names.

The blocklists are explicit and user-editable because the set of "default
configuration" keys is not standardized anywhere; the defaults below cover
the layout and configuration content commonly present in tool-exported
model files.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .graph import find_system
from .syntax import Param, ParamValue, Section, SyntaxTree

__all__ = [
    "SimplifyPolicy",
    "SimplifyResult",
    "RenameMap",
    "FlatnessReport",
    "DuplicateOriginalName",
    "simplify",
    "index_to_name",
    "rename_identifiers",
    "is_flat_no_deps",
]

# Layout and appearance keys carried by blocks, lines, annotations, and the
# model/system headers; none affect structure.
LAYOUT_PARAMS = frozenset({
    "Position", "ZOrder", "Location", "Points", "Labels", "NamePlacement",
    "LabelPosition", "FontName", "FontSize", "FontWeight", "FontAngle",
    "BackgroundColor", "ForegroundColor", "DropShadow", "ShowName",
    "HideAutomaticName", "Orientation", "SIDHighWatermark", "SID",
    "ReportName", "ScreenColor", "PaperOrientation", "PaperPositionMode",
    "PaperType", "PaperUnits", "TiledPaperMargins", "TiledPageScale",
    "ShowPageBoundaries", "ZoomFactor", "Open", "SetExecutionDomain",
    "ExecutionDomainType",
})

# Model-header bookkeeping written by the exporting tool; defaults that
# carry no diagram structure.
HEADER_PARAMS = frozenset({
    "Version", "SavedCharacterEncoding", "LibraryLinkDisplay", "ScopeRefreshTime",
    "OverrideScopeRefreshTime", "DisableAllScopes", "DataTypeOverride",
    "MinMaxOverflowLogging", "MinMaxOverflowArchiveMode", "Created", "Creator",
    "UpdateHistory", "ModifiedByFormat", "LastModifiedBy", "ModifiedDateFormat",
    "LastModifiedDate", "RTWModifiedTimeStamp", "ModelVersionFormat",
    "ConfigurationManager", "SampleTimeColors", "SampleTimeAnnotations",
    "WideLines", "ShowLineDimensions", "ShowPortDataTypes", "ShowLoopsOnError",
    "IgnoreBidirectionalLines", "ShowStorageClass", "ShowTestPointIcons",
    "ShowSignalResolutionIcons", "ShowViewerIcons", "SortedOrder",
    "ExecutionContextIcon", "ShowLinearizationAnnotations", "BlockNameDataTip",
    "BlockParametersDataTip", "BlockDescriptionStringDataTip", "ToolBar",
    "StatusBar", "BrowserShowLibraryLinks", "BrowserLookUnderMasks",
    "SimulationMode", "LinearizationMsg", "Profile", "ParamWorkspaceSource",
    "RecordCoverage", "CovPath", "CovSaveName", "CovMetricSettings",
    "CovNameIncrementing", "CovHtmlReporting", "CovForceBlockReductionOff",
    "ExtModeBatchMode", "ExtModeEnableFloating", "ExtModeTrigType",
    "ExtModeTrigMode", "ExtModeTrigPort", "ExtModeTrigElement",
    "ExtModeTrigDuration", "ExtModeTrigDurationFloating", "ExtModeTrigHoldOff",
    "ExtModeTrigDelay", "ExtModeTrigDirection", "ExtModeTrigLevel",
    "ExtModeArchiveMode", "ExtModeAutoIncOneShot", "ExtModeIncDirWhenArm",
    "ExtModeAddSuffixToVar", "ExtModeWriteAllDataToWs", "ExtModeArmWhenConnect",
    "ExtModeSkipDownloadWhenConnect", "ExtModeLogAll", "ExtModeAutoUpdateStatusClock",
    "ShowModelReferenceBlockVersion", "ShowModelReferenceBlockIO",
})

DEFAULT_PARAM_BLOCKLIST = LAYOUT_PARAMS | HEADER_PARAMS

DEFAULT_SECTION_BLOCKLIST = frozenset({
    "BlockDefaults", "BlockParameterDefaults", "AnnotationDefaults",
    "LineDefaults", "SystemDefaults", "MaskDefaults", "MaskParameterDefaults",
    "Annotation", "Array", "ConfigSet", "Simulink.ConfigSet",
    "ConfigManagerSettings", "EditorSettings", "SimulationSettings",
    "GraphicalInterface", "UserParameters", "ModelReferenceInformation",
    "Object", "WindowsInfo", "Verification", "MaskObject", "Mask",
})

# Block types whose presence makes a model non-flat.
HIERARCHY_BLOCK_TYPES = frozenset({"SubSystem", "Reference", "S-Function", "ModelReference"})

# A block carrying one of these parameters links to an external library.
LIBRARY_LINK_PARAMS = frozenset({"SourceBlock", "SourceType", "LibraryVersion"})


class DuplicateOriginalName(Exception):
    """Two blocks share a name, so no bijective rename exists."""


@dataclass(frozen=True)
class SimplifyPolicy:
    """What to strip: parameter keys and section names (case-sensitive)."""

    param_blocklist: frozenset[str] = DEFAULT_PARAM_BLOCKLIST
    section_blocklist: frozenset[str] = DEFAULT_SECTION_BLOCKLIST
    strip_comments: bool = True
    collapse_whitespace: bool = True

    def with_overrides(self, keep_params: list[str] | None = None,
                       drop_params: list[str] | None = None) -> "SimplifyPolicy":
        block = set(self.param_blocklist)
        block -= set(keep_params or ())
        block |= set(drop_params or ())
        return replace(self, param_blocklist=frozenset(block))

    @staticmethod
    def from_file(path: str) -> "SimplifyPolicy":
        """Load a policy from ``key = value`` lines.

        Keys: drop_params, drop_sections (comma-separated, replacing the
        defaults when present), keep_params (removed from the default
        param blocklist), strip_comments, collapse_whitespace (true/false).
        """
        policy = SimplifyPolicy()
        with open(path, encoding="utf-8") as fh:
            for raw in fh:
                line = raw.strip()
                if not line or line.startswith("#") or "=" not in line:
                    continue
                key, _, value = line.partition("=")
                key, value = key.strip(), value.strip()
                items = frozenset(v.strip() for v in value.split(",") if v.strip())
                if key == "drop_params":
                    policy = replace(policy, param_blocklist=items)
                elif key == "drop_sections":
                    policy = replace(policy, section_blocklist=items)
                elif key == "keep_params":
                    policy = replace(policy,
                                     param_blocklist=policy.param_blocklist - items)
                elif key == "strip_comments":
                    policy = replace(policy, strip_comments=value.lower() == "true")
                elif key == "collapse_whitespace":
                    policy = replace(policy, collapse_whitespace=value.lower() == "true")
        return policy


@dataclass
class SimplifyResult:
    tree: SyntaxTree
    empty_after_simplify: bool
    removed_params: int = 0
    removed_sections: int = 0


def _collapse_vector_ws(value: ParamValue) -> ParamValue:
    """Normalize whitespace inside vector lexemes: ``[1, 2]`` -> ``[1,2]``."""
    out = []
    for lx in value.lexemes:
        if lx.startswith("["):
            lx = "".join(lx.split())
        out.append(lx)
    return ParamValue(tuple(out))


def simplify(tree: SyntaxTree, policy: SimplifyPolicy | None = None) -> SimplifyResult:
    """Remove all blocklisted params and sections, recursively.

    The result still parses and prints. A model whose block list becomes
    empty is flagged ``empty_after_simplify`` (e.g. annotation-only
    models), which callers treat as a drop signal, not a failure.
    """
    policy = policy or SimplifyPolicy()
    removed_params = 0
    removed_sections = 0

    def walk(sec: Section) -> Section:
        nonlocal removed_params, removed_sections
        params: list[Param] = []
        for p in sec.params:
            if p.key in policy.param_blocklist:
                removed_params += 1
                continue
            value = _collapse_vector_ws(p.value) if policy.collapse_whitespace else p.value
            params.append(Param(p.key, value))
        children: list[Section] = []
        for c in sec.children:
            if c.name in policy.section_blocklist:
                removed_sections += 1
                continue
            children.append(walk(c))
        return Section(sec.name, params, children)

    out = SyntaxTree(walk(tree.root))
    has_blocks = bool(find_system(out).children_named("Block"))
    return SimplifyResult(out, empty_after_simplify=not has_blocks,
                          removed_params=removed_params,
                          removed_sections=removed_sections)


def index_to_name(i: int) -> str:
    """Bijective base-26 name for a nonnegative index: 0 -> a, 26 -> aa."""
    if i < 0:
        raise ValueError("index must be nonnegative")
    chars = []
    n = i + 1
    while n > 0:
        n -= 1
        chars.append(chr(ord("a") + n % 26))
        n //= 26
    return "".join(reversed(chars))


@dataclass
class RenameMap:
    """Ordered bijection original name -> short sequential name."""

    pairs: dict[str, str] = field(default_factory=dict)

    def apply(self, name: str) -> str:
        return self.pairs.get(name, name)

    @staticmethod
    def from_order(order: list[str]) -> "RenameMap":
        if len(set(order)) != len(order):
            raise DuplicateOriginalName("appearance order contains a repeated name")
        return RenameMap({name: index_to_name(i) for i, name in enumerate(order)})


def rename_identifiers(tree: SyntaxTree, order: list[str]) -> tuple[SyntaxTree, RenameMap]:
    """Rewrite block names and all edge endpoint references consistently.

    ``order`` is the block-name appearance order in the restructured file,
    so names come out as a, b, c, ... in that order. Raises
    DuplicateOriginalName when two blocks share a name.
    """
    rename = RenameMap.from_order(order)

    seen: set[str] = set()

    def walk(sec: Section, in_line: bool) -> Section:
        params: list[Param] = []
        for p in sec.params:
            if sec.name == "Block" and p.key == "Name":
                original = p.value.as_string()
                if original in seen:
                    raise DuplicateOriginalName(f"block name {original!r} appears twice")
                seen.add(original)
                params.append(Param(p.key, ParamValue.quoted(rename.apply(original))))
            elif in_line and p.key in ("SrcBlock", "DstBlock"):
                params.append(Param(p.key, ParamValue.quoted(rename.apply(p.value.as_string()))))
            else:
                params.append(p)
        children = [walk(c, in_line or c.name in ("Line", "Branch")) for c in sec.children]
        return Section(sec.name, params, children)

    return SyntaxTree(walk(tree.root, False)), rename


@dataclass
class FlatnessReport:
    flat: bool
    reasons: list[str] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.flat


def is_flat_no_deps(tree: SyntaxTree) -> FlatnessReport:
    """Whether the model is flat with no library or custom-code dependencies.

    False when any block is hierarchical (subsystem), a library reference,
    or an S-function, or carries a library-link parameter; each offender is
    named in ``reasons``.
    """
    reasons: list[str] = []

    def walk(sec: Section) -> None:
        if sec.name == "Block":
            type_val = sec.get("BlockType")
            name_val = sec.get("Name")
            label = name_val.as_string() if name_val else "<unnamed>"
            if type_val is not None and type_val.as_string() in HIERARCHY_BLOCK_TYPES:
                reasons.append(f"block {label!r} has type {type_val.as_string()}")
            link_keys = [p.key for p in sec.params if p.key in LIBRARY_LINK_PARAMS]
            if link_keys:
                reasons.append(f"block {label!r} carries library link parameter {link_keys[0]}")
        for c in sec.children:
            walk(c)

    walk(tree.root)
    return FlatnessReport(flat=not reasons, reasons=reasons)
