import streamlit as st

from core.errors import ValidationError
from core.ipm import SolverConfig
from core.sdp import Budget


def sidebar_ui():
    """Sidebar with solver settings. Returns (SolverConfig or None, Budget, aleph override)."""

    st.sidebar.title("⚙️ Solver Settings")

    st.sidebar.markdown("### 🎯 Cardinality")
    override = st.sidebar.toggle(
        "Override ℵ from the instance",
        value=st.session_state.get("aleph_override_on", False),
        key="aleph_override_on",
    )
    aleph = None
    if override:
        aleph = int(st.sidebar.number_input("ℵ (max number of stocks)", min_value=0, value=3,
                                            step=1, key="aleph_override"))

    budget_label = st.sidebar.radio(
        "Budget row",
        ["Σx ≤ 1", "Σx = 1"],
        index=0,
        help="Σx ≤ 1 allows holding cash; Σx = 1 forces full investment",
        key="budget_mode",
    )
    budget = Budget.AT_MOST if budget_label == "Σx ≤ 1" else Budget.EXACT

    st.sidebar.markdown("---")
    st.sidebar.markdown("### 🧮 Interior Point")
    gap_tol = st.sidebar.select_slider("Gap tolerance", options=[1e-6, 1e-7, 1e-8, 1e-9],
                                       value=1e-8, key="gap_tol")
    feas_tol = st.sidebar.select_slider("Feasibility tolerance", options=[1e-6, 1e-7, 1e-8, 1e-9],
                                        value=1e-8, key="feas_tol")
    max_iter = st.sidebar.number_input("Max iterations", min_value=1, max_value=500, value=100,
                                       step=10, key="max_iter")

    cfg = None
    try:
        cfg = SolverConfig(gap_tol=float(gap_tol), feas_tol=float(feas_tol), max_iter=int(max_iter))
    except ValidationError as e:
        st.sidebar.error(f"❌ {e}")

    st.sidebar.markdown("---")
    if st.sidebar.button("🆕 Clear results"):
        st.session_state.report = None
        st.rerun()

    st.sidebar.caption("✨ Cardinality-constrained portfolio bounds")
    return cfg, budget, aleph
