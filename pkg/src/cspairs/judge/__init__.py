from .store import (  # noqa: F401
    Assignment,
    DuplicateJudgment,
    JudgmentLog,
    JudgmentRecord,
    Plan,
    export_judgments,
    issue_token,
    plan_assignments,
    presentation_position,
)
