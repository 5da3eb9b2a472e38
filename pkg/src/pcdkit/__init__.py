"""Policy compliance workbench.

Policies are expression trees over yes/no/NEI questions; scenarios are judged
by answering the questions (gold data, simulated noise, or a remote QA model)
and combining the answers under strong Kleene three-valued logic. The package
also converts conversational dialog corpora into compliance datasets, computes
the evaluation metric suite, and drives guided interviews over CLI and HTTP.
"""

from .corpus import (
    Corpus,
    CorpusStats,
    Policy,
    QAInstance,
    Question,
    Scenario,
    Violation,
    corpus_stats,
    load_corpus,
    load_corpus_dir,
    save_corpus,
    save_corpus_dir,
    validate_corpus,
)
from .evaluation import (
    EvalReport,
    PredictionRecord,
    RaterAnswers,
    agreement_study,
    build_report,
    cohen_kappa,
    cohen_kappa_detail,
    kendall_tau,
    macro_accuracy,
    macro_accuracy_over_policies,
    per_class_recall,
    run_pcd,
)
from .interview import (
    Session,
    SessionStatus,
    SessionStore,
    abandon,
    missing_information,
    next_question,
    record_answer,
    select_next_question,
    start_session,
)
from .logic import (
    NEI,
    NO,
    YES,
    And,
    Node,
    Not,
    Or,
    Resolution,
    TriValue,
    Var,
    evaluate,
    parse_tree,
    resolve_partial,
    serialize_tree,
    tree_complexity,
    tree_questions,
    tree_snapshot,
)
from .oracles import (
    AnswerProvider,
    ConfusionSpec,
    ConstantOracle,
    GoldOracle,
    NoisyOracle,
    OracleAnswer,
    RemoteOracle,
    build_oracle,
)
from .sharc import (
    ConversionReport,
    ConversionResult,
    SharcUtterance,
    collect_policy_questions,
    convert_corpus,
    convert_utterances,
    to_entailment_instance,
    to_qa_instances,
)

__version__ = "0.1.0"
