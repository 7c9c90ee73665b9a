import streamlit as st

from components.instance_loader import handle_instance_source
from components.report_view import report_view
from components.sidebar import sidebar_ui
from core.cardopt import run
from core.errors import ValidationError
from utils.config import configure_logging

st.set_page_config(page_title="CardSDP", page_icon="📈", layout="wide")
configure_logging()

# Initialize session state
if "report" not in st.session_state:
    st.session_state.report = None

cfg, budget, aleph = sidebar_ui()

st.title("📈 CardSDP - Portfolio Bounds Desk")
st.caption("SDP lower bound, rounded portfolio and gap for cardinality-constrained mean-variance selection")

st.markdown("### 📚 Instance")
inst = handle_instance_source()

if inst is not None and aleph is not None:
    try:
        inst = inst.with_aleph(aleph)
    except ValidationError as e:
        st.error(f"❌ {e}")
        inst = None

st.divider()

if st.button("🚀 Solve", key="solve_btn", disabled=inst is None or cfg is None):
    with st.spinner("💡 Solving the relaxation and rounding..."):
        st.session_state.report = run(inst, cfg, budget)

if st.session_state.report is not None:
    report_view(st.session_state.report)
