#!/usr/bin/env python3
"""Regenerate the bundled synthetic corpus and fixtures.

Deterministic: the same seed always produces byte-identical files. The
corpus mixes straight chains, branched diamonds, a feedback cycle, and
dangling blocks so the pipeline sees every structural case, and every
file carries the layout/config noise the simplifier exists to strip.
"""

from __future__ import annotations

import random
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from mdlfuzz.syntax import Param, ParamValue, Section, SyntaxTree, print_tree

SEED = 20240601

DEFAULT_NAMES = {
    "Sin": "Sine Wave", "Constant": "Constant", "Step": "Step",
    "Gain": "Gain", "Abs": "Abs", "Saturate": "Saturation",
    "Scope": "Scope", "Display": "Display", "Terminator": "Terminator",
    "ToWorkspace": "To Workspace", "UnitDelay": "Unit Delay",
    "Memory": "Memory", "Ground": "Ground", "Outport": "Out1",
}

SURVIVOR_PARAMS = {
    "Constant": [("Value", "1")],
    "Gain": [("Gain", "1")],
}


def bare(text: str) -> ParamValue:
    return ParamValue.bare(str(text))


def quoted(text: str) -> ParamValue:
    return ParamValue.quoted(text)


def vector(values) -> ParamValue:
    return ParamValue((f"[{', '.join(str(v) for v in values)}]",))


def block(rng: random.Random, btype: str, name: str) -> Section:
    params = [Param("BlockType", bare(btype)), Param("Name", quoted(name))]
    for key, value in SURVIVOR_PARAMS.get(btype, ()):
        params.append(Param(key, quoted(value)))
    x = rng.randrange(20, 600, 5)
    y = rng.randrange(20, 400, 5)
    params.append(Param("Position", vector([x, y, x + 30, y + 30])))
    params.append(Param("ZOrder", bare(rng.randrange(1, 40))))
    return Section("Block", params)


def line(rng: random.Random, src: str, dst: str | None, dst_port: int = 1,
         branches: list[tuple[str, int]] | None = None,
         with_points: bool = False) -> Section:
    params = [Param("SrcBlock", quoted(src)), Param("SrcPort", bare(1))]
    if with_points:
        params.append(Param("Points", vector([rng.randrange(0, 80, 5), 0])))
    children = []
    if dst is not None:
        params.append(Param("DstBlock", quoted(dst)))
        params.append(Param("DstPort", bare(dst_port)))
    for bdst, bport in branches or ():
        children.append(Section("Branch", [
            Param("DstBlock", quoted(bdst)), Param("DstPort", bare(bport))]))
    return Section("Line", params, children)


def annotation(rng: random.Random, text: str) -> Section:
    return Section("Annotation", [
        Param("Name", quoted(text)),
        Param("Position", vector([rng.randrange(50, 500, 5), rng.randrange(20, 300, 5)])),
    ])


def model(rng: random.Random, name: str, blocks: list[Section],
          lines: list[Section], note: str | None = None) -> SyntaxTree:
    defaults = Section("BlockParameterDefaults", [], [
        Section("Block", [Param("BlockType", bare("Gain")),
                          Param("Gain", quoted("1"))]),
        Section("Block", [Param("BlockType", bare("Scope")),
                          Param("Floating", bare("off"))]),
    ])
    system_children: list[Section] = list(blocks)
    if note is not None:
        system_children.append(annotation(rng, note))
    system_children.extend(lines)
    system = Section("System", [
        Param("Name", quoted(name)),
        Param("Location", vector([rng.randrange(40, 200, 5), rng.randrange(40, 200, 5),
                                  900, 700])),
        Param("Open", bare("off")),
    ], system_children)
    root = Section("Model", [
        Param("Name", quoted(name)),
        Param("Version", quoted("10.2")),
        Param("SavedCharacterEncoding", quoted("UTF-8")),
        Param("SampleTimeColors", bare("off")),
        Param("WideLines", bare("off")),
    ], [defaults, system])
    return SyntaxTree(root)


def two_chain(rng, name, src_type, sink_type):
    a, b = DEFAULT_NAMES[src_type], DEFAULT_NAMES[sink_type]
    return model(rng, name,
                 [block(rng, src_type, a), block(rng, sink_type, b)],
                 [line(rng, a, b, with_points=rng.random() < 0.4)],
                 note="auto-generated" if rng.random() < 0.2 else None)


def three_chain(rng, name, src_type, mid_type, sink_type):
    a, b, c = DEFAULT_NAMES[src_type], DEFAULT_NAMES[mid_type], DEFAULT_NAMES[sink_type]
    return model(rng, name,
                 [block(rng, src_type, a), block(rng, mid_type, b),
                  block(rng, sink_type, c)],
                 [line(rng, a, b), line(rng, b, c, with_points=rng.random() < 0.3)],
                 note="auto-generated" if rng.random() < 0.2 else None)


def diamond(rng, name, src_type, mid_type):
    a = DEFAULT_NAMES[src_type]
    b = DEFAULT_NAMES[mid_type]
    c, d = DEFAULT_NAMES["Saturate"], DEFAULT_NAMES["Outport"]
    blocks = [block(rng, src_type, a), block(rng, mid_type, b),
              block(rng, "Saturate", c), block(rng, "Outport", d)]
    lines = [line(rng, a, None, branches=[(b, 1), (c, 1)]),
             line(rng, b, d, 1), line(rng, c, d, 2)]
    return model(rng, name, blocks, lines)


def feedback_cycle(rng, name):
    a, b = DEFAULT_NAMES["UnitDelay"], DEFAULT_NAMES["Memory"]
    return model(rng, name,
                 [block(rng, "UnitDelay", a), block(rng, "Memory", b)],
                 [line(rng, a, b), line(rng, b, a)])


def dangling(rng, name):
    return model(rng, name, [block(rng, "Ground", DEFAULT_NAMES["Ground"])], [])


def build_corpus() -> list[tuple[str, SyntaxTree]]:
    rng = random.Random(SEED)
    models: list[tuple[str, SyntaxTree]] = []
    idx = 0

    def add(tree):
        nonlocal idx
        models.append((f"model{idx:02d}.mdl", tree))
        idx += 1

    pairs = [(src, sink) for src in ("Sin", "Constant", "Step")
             for sink in ("Scope", "Display")]
    for repeat in range(38):
        src, sink = pairs[repeat % len(pairs)]
        add(two_chain(rng, f"m{idx:02d}", src, sink))
    sinks = ("Terminator", "ToWorkspace")
    for i, (src, mid) in enumerate((s, m) for s in ("Sin", "Constant", "Step")
                                   for m in ("Gain", "Abs")):
        add(three_chain(rng, f"m{idx:02d}", src, mid, sinks[i % 2]))
    add(diamond(rng, f"m{idx:02d}", "Sin", "Gain"))
    add(diamond(rng, f"m{idx:02d}", "Constant", "Abs"))
    add(feedback_cycle(rng, f"m{idx:02d}"))
    add(feedback_cycle(rng, f"m{idx:02d}"))
    add(dangling(rng, f"m{idx:02d}"))
    add(dangling(rng, f"m{idx:02d}"))
    return models


def export_style_fixture() -> SyntaxTree:
    """A tool-export-style file: heavy config, defaults, layout, annotations."""
    rng = random.Random(SEED + 1)
    config_params = [
        Param(key, quoted(val)) for key, val in [
            ("Solver", "ode45"), ("RelTol", "1e-3"), ("AbsTol", "auto"),
            ("Refine", "1"), ("MaxOrder", "5"), ("ZeroCross", "on"),
            ("StartTime", "0.0"), ("StopTime", "10.0"), ("SolverMode", "Auto"),
            ("EnableMultiTasking", "off"), ("MaxStep", "auto"), ("MinStep", "auto"),
            ("MaxConsecutiveMinStep", "1"), ("InitialStep", "auto"),
            ("FixedStep", "auto"), ("ExtrapolationOrder", "4"),
            ("NumberNewtonIterations", "1"), ("SolverResetMethod", "Fast"),
            ("PositivePriorityOrder", "off"), ("AutoInsertRateTranBlk", "off"),
            ("SampleTimeConstraint", "Unconstrained"), ("InsertRTBMode", "Whenever"),
            ("SignalLogging", "on"), ("DataLogging", "off"), ("ReturnWorkspaceOutputs", "off"),
            ("LoadExternalInput", "off"), ("LoadInitialState", "off"),
            ("SaveFinalState", "off"), ("SaveCompleteFinalSimState", "off"),
            ("SaveFormat", "Dataset"), ("SaveOutput", "on"), ("SaveState", "off"),
            ("SaveTime", "on"), ("SignalLoggingName", "logsout"),
            ("OptimizeBlockIOStorage", "on"), ("BufferReuse", "on"),
            ("EnhancedBackFolding", "off"), ("ConditionallyExecuteInputs", "on"),
            ("DefaultParameterBehavior", "Tunable"), ("UseDivisionForNetSlopeComputation", "off"),
            ("ConsistencyChecking", "none"), ("ArrayBoundsChecking", "none"),
            ("SignalInfNanChecking", "none"), ("SignalRangeChecking", "none"),
            ("ReadBeforeWriteMsg", "UseLocalSettings"), ("WriteAfterWriteMsg", "UseLocalSettings"),
            ("WriteAfterReadMsg", "UseLocalSettings"), ("AlgebraicLoopMsg", "warning"),
            ("ArtificialAlgebraicLoopMsg", "warning"), ("SaveWithDisabledLinksMsg", "warning"),
            ("SaveWithParameterizedLinksMsg", "warning"), ("CheckSSInitialOutputMsg", "on"),
            ("UnderspecifiedInitializationDetection", "Simplified"),
            ("MergeDetectMultiDrivingBlocksExec", "error"),
        ]
    ]
    array = Section("Array", [
        Param("Type", quoted("Handle")), Param("Dimension", bare("1")),
    ], [Section("Simulink.ConfigSet", config_params)])

    block_defaults = Section("BlockDefaults", [
        Param("ForegroundColor", quoted("black")),
        Param("BackgroundColor", quoted("white")),
        Param("DropShadow", bare("off")),
        Param("NamePlacement", quoted("normal")),
        Param("FontName", quoted("Helvetica")),
        Param("FontSize", bare("10")),
        Param("FontWeight", quoted("normal")),
        Param("FontAngle", quoted("normal")),
        Param("ShowName", bare("on")),
    ])
    annotation_defaults = Section("AnnotationDefaults", [
        Param("HorizontalAlignment", quoted("center")),
        Param("VerticalAlignment", quoted("middle")),
        Param("ForegroundColor", quoted("black")),
        Param("BackgroundColor", quoted("white")),
        Param("DropShadow", bare("off")),
        Param("FontName", quoted("Helvetica")),
        Param("FontSize", bare("10")),
    ])
    line_defaults = Section("LineDefaults", [
        Param("FontName", quoted("Helvetica")),
        Param("FontSize", bare("9")),
        Param("FontWeight", quoted("normal")),
        Param("FontAngle", quoted("normal")),
    ])
    param_defaults = Section("BlockParameterDefaults", [], [
        Section("Block", [Param("BlockType", bare("Constant")),
                          Param("Value", quoted("1")),
                          Param("VectorParams1D", bare("on"))]),
        Section("Block", [Param("BlockType", bare("Gain")),
                          Param("Gain", quoted("1")),
                          Param("Multiplication", quoted("Element-wise(K.*u)"))]),
        Section("Block", [Param("BlockType", bare("Scope")),
                          Param("Floating", bare("off")),
                          Param("ModelBased", bare("off"))]),
    ])

    names = ["Sine Wave", "Gain", "Gain1", "Scope", "Constant", "Display"]
    types = ["Sin", "Gain", "Gain", "Scope", "Constant", "Display"]
    blocks = []
    for btype, bname in zip(types, names):
        blocks.append(block(rng, btype, bname))
    lines = [
        line(rng, "Sine Wave", None, branches=[("Gain", 1), ("Gain1", 1)], with_points=True),
        line(rng, "Gain", "Scope", 1, with_points=True),
        line(rng, "Constant", "Display", 1),
        line(rng, "Gain1", "Scope", 1),
    ]
    system_children = blocks + [annotation(rng, "export-style fixture"),
                                annotation(rng, "second note")] + lines
    system = Section("System", [
        Param("Name", quoted("export_style")),
        Param("Location", vector([100, 100, 1000, 760])),
        Param("Open", bare("on")),
        Param("ReportName", quoted("simulink-default.rpt")),
        Param("ScreenColor", quoted("white")),
        Param("PaperOrientation", quoted("landscape")),
        Param("PaperPositionMode", quoted("auto")),
        Param("PaperType", quoted("usletter")),
        Param("PaperUnits", quoted("inches")),
        Param("TiledPaperMargins", vector([0.5, 0.5, 0.5, 0.5])),
        Param("TiledPageScale", bare("1")),
        Param("ShowPageBoundaries", bare("off")),
        Param("ZoomFactor", quoted("100")),
    ], system_children)

    header = [
        Param("Name", quoted("export_style")),
        Param("Version", quoted("10.2")),
        Param("SavedCharacterEncoding", quoted("UTF-8")),
        Param("LibraryLinkDisplay", quoted("disabled")),
        Param("ScopeRefreshTime", bare("0.035000")),
        Param("OverrideScopeRefreshTime", bare("on")),
        Param("DisableAllScopes", bare("off")),
        Param("DataTypeOverride", quoted("UseLocalSettings")),
        Param("MinMaxOverflowLogging", quoted("UseLocalSettings")),
        Param("Created", quoted("Mon Mar 01 10:00:00 2021")),
        Param("Creator", quoted("exporter")),
        Param("UpdateHistory", quoted("UpdateHistoryNever")),
        Param("ModifiedByFormat", quoted("%<Auto>")),
        Param("LastModifiedBy", quoted("exporter")),
        Param("ModifiedDateFormat", quoted("%<Auto>")),
        Param("LastModifiedDate", quoted("Tue Mar 02 11:30:00 2021")),
        Param("RTWModifiedTimeStamp", bare("530000000")),
        Param("ModelVersionFormat", quoted("1.%<AutoIncrement:3>")),
        Param("ConfigurationManager", quoted("none")),
        Param("SampleTimeColors", bare("off")),
        Param("SampleTimeAnnotations", bare("off")),
        Param("WideLines", bare("off")),
        Param("ShowLineDimensions", bare("off")),
        Param("ShowPortDataTypes", bare("off")),
        Param("ShowLoopsOnError", bare("on")),
        Param("IgnoreBidirectionalLines", bare("off")),
        Param("ShowStorageClass", bare("off")),
        Param("ShowTestPointIcons", bare("on")),
        Param("ShowSignalResolutionIcons", bare("on")),
        Param("ShowViewerIcons", bare("on")),
        Param("SortedOrder", bare("off")),
        Param("ExecutionContextIcon", bare("off")),
        Param("ShowLinearizationAnnotations", bare("on")),
        Param("BlockNameDataTip", bare("off")),
        Param("BlockParametersDataTip", bare("off")),
        Param("BlockDescriptionStringDataTip", bare("off")),
        Param("ToolBar", bare("on")),
        Param("StatusBar", bare("on")),
        Param("BrowserShowLibraryLinks", bare("off")),
        Param("BrowserLookUnderMasks", bare("off")),
        Param("SimulationMode", quoted("normal")),
        Param("LinearizationMsg", quoted("none")),
        Param("Profile", bare("off")),
        Param("ParamWorkspaceSource", quoted("MATLABWorkspace")),
        Param("RecordCoverage", bare("off")),
        Param("CovSaveName", quoted("covdata")),
        Param("CovMetricSettings", quoted("dw")),
        Param("CovNameIncrementing", bare("off")),
        Param("CovHtmlReporting", bare("on")),
        Param("ExtModeBatchMode", bare("off")),
        Param("ExtModeEnableFloating", bare("on")),
        Param("ExtModeTrigType", quoted("manual")),
        Param("ExtModeTrigMode", quoted("normal")),
        Param("ExtModeTrigPort", quoted("1")),
        Param("ExtModeTrigElement", quoted("any")),
        Param("ExtModeTrigDuration", bare("1000")),
        Param("ExtModeTrigHoldOff", bare("0")),
        Param("ExtModeTrigDelay", bare("0")),
        Param("ExtModeTrigDirection", quoted("rising")),
        Param("ExtModeTrigLevel", bare("0")),
        Param("ExtModeArchiveMode", quoted("off")),
        Param("ExtModeAutoIncOneShot", bare("off")),
        Param("ExtModeIncDirWhenArm", bare("off")),
        Param("ExtModeAddSuffixToVar", bare("off")),
        Param("ExtModeWriteAllDataToWs", bare("off")),
        Param("ExtModeArmWhenConnect", bare("on")),
        Param("ExtModeSkipDownloadWhenConnect", bare("off")),
        Param("ExtModeLogAll", bare("on")),
        Param("ExtModeAutoUpdateStatusClock", bare("on")),
    ]
    root = Section("Model", header, [
        array, block_defaults, annotation_defaults, line_defaults, param_defaults, system,
    ])
    return SyntaxTree(root)


def main() -> None:
    base = Path(__file__).resolve().parent.parent / "src" / "mdlfuzz" / "data"
    corpus_dir = base / "corpus50"
    fixture_dir = base / "fixtures"
    corpus_dir.mkdir(parents=True, exist_ok=True)
    fixture_dir.mkdir(parents=True, exist_ok=True)

    models = build_corpus()
    assert len(models) == 50, len(models)
    for fname, tree in models:
        (corpus_dir / fname).write_text(print_tree(tree), encoding="utf-8")
    (fixture_dir / "export_style.mdl").write_text(
        print_tree(export_style_fixture()), encoding="utf-8")
    print(f"wrote {len(models)} corpus models and 1 fixture under {base}")


if __name__ == "__main__":
    main()
