from typing import Final

LABELS: Final = (1, 2, 3, 4, 5)
NUM_LABELS: Final = len(LABELS)

# Share of each intensity class in the manually annotated pairs (labels 1..5).
# Sums to 0.99; consumers renormalise.
GLOBAL_LABEL_PROPORTIONS: Final = (0.09, 0.74, 0.09, 0.03, 0.04)

### Section categories
ABSTRACT = "Abstract"
INTRODUCTION = "Introduction"
RELATED_WORK = "RelatedWork"
CONCLUSION = "Conclusion"
REST = "Rest"

# Checked top to bottom; first match wins, anything else is Rest.
SECTION_KEYWORDS: Final = (
    (ABSTRACT, (r"\babstract\b",)),
    (INTRODUCTION, (r"\bintroduction\b", r"\bintro\b")),
    (
        RELATED_WORK,
        (
            r"\brelated\b",
            r"\bprevious work",
            r"\bprior work",
            r"\bbackground\b",
            r"\bliterature\b",
            r"\bstate of the art\b",
        ),
    ),
    (
        CONCLUSION,
        (r"\bconclu", r"\bsummary\b", r"\bfuture work", r"\bfinal remarks\b"),
    ),
)

### Context word lists (duplicates kept)
REL_WORDS: Final = (
    "pivotal", "comparable", "innovative", "relevant", "relevantly", "inspiring",
    "related", "relatedly", "similar", "similarly", "applicable", "appropriate",
    "pertinent", "influential", "influenced", "original", "originally", "useful",
    "suggested", "interesting", "inspired", "likewise",
)  # fmt: skip
REC_WORDS: Final = (
    "recent", "recently", "latest", "later", "late", "latest", "up-to-date",
    "continuing", "continued", "upcoming", "expected", "update", "renewed",
    "extended", "subsequent", "subsequently", "initial", "initially", "sudden",
    "current", "currently", "future", "unexpected", "previous", "previously",
    "old", "ongoing", "imminent", "anticipated", "unprecedented", "proposed",
    "startling", "preliminary", "ensuing", "repeated", "reported", "new",
    "earlier", "earliest", "early", "existing", "further", "revised", "improved",
)  # fmt: skip
EXT_WORDS: Final = (
    "greatly", "awfully", "drastically", "intensely", "acutely", "almighty",
    "exceptionally", "excessively", "exceedingly", "tremendously", "importantly",
    "significantly", "notably", "outstandingly",
)  # fmt: skip
COMP_WORDS: Final = (
    "easy", "easier", "easiest", "vague", "vaguer", "vaguest", "weak", "weaker",
    "weakest", "strong", "stronger", "strongest", "bogus", "unclear",
)  # fmt: skip

MODAL_WORDS: Final = frozenset(
    {"can", "could", "may", "might", "must", "shall", "should", "will", "would"}
)

# POS-tag patterns over the space-joined tags of the reference sentence.
# Citation tokens carry the tag "()" before matching.
POS_PATTERNS: Final = (
    r".*\(\) VV[DPZN].*",
    r".*(VHP|VHZ) VV.*",
    r".*VH(D|G|N|P|Z) (RB )*VBN.*",
    r".*MD (RB )*VB(RB )* VVN.*",
    r"[^IW.]*VB(D|P|Z) (RB )*VV[ND].*",
    r"(RB )*PP (RB )*V.*",
    r".*VVG (NP )*(CC )*(NP ).*",
)
CITATION_TAG: Final = "()"

### Feature column layout
FEATURE_GROUPS: Final = ("cf", "sf", "ff", "pf", "lf", "ms")

CF_COLUMNS: Final = (
    "CF:Alone",
    "CF:First",
    "CF:Relevant",
    "CF:Recent",
    "CF:Extreme",
    "CF:Comp",
)
SF_COLUMNS: Final = (
    "SF:TTitle",
    "SF:TAbs",
    "SF:TIntro",
    "SF:TConcl",
    "SF:TRest",
    "SF:RCTitle",
    "SF:RCAbs",
    "SF:RCIntro",
    "SF:RCConcl",
    "SF:RCRest",
)
FF_COLUMNS: Final = ("FF:Whole", "FF:Intro", "FF:Rel", "FF:Rest", "FF:Sec")
PF_COLUMNS: Final = ("PF:Begin", "PF:End", "PF:Mean", "PF:Std")
MS_COLUMNS: Final = ("MS:GCount", "MS:SelfC", "MS:Time", "MS:CoCite")

DENSE_COLUMNS: Final = {
    "cf": CF_COLUMNS,
    "sf": SF_COLUMNS,
    "ff": FF_COLUMNS,
    "pf": PF_COLUMNS,
    "ms": MS_COLUMNS,
}

### Output file names inside the run directory
FEATURES_FILE = "features.tsv"
PREDICTIONS_FILE = "predictions.tsv"
RUN_METADATA_FILE = "run.json"
METRICS_FILE = "metrics.json"
STACKING_FILE = "stacking.json"
GRAPH_FILE = "graph.tsv"
CORRELATIONS_FILE = "measure_correlations.json"
RANKING_FILE = "ranking_{measure}.tsv"
