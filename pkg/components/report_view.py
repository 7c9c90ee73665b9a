import math

import pandas as pd
import streamlit as st

from utils.formatting import fmt_gap, fmt_num


def report_view(report):
    """Metrics, spectrum, portfolio and stage log of one RunReport."""
    st.subheader("📊 Bounds")
    col1, col2, col3, col4 = st.columns(4)
    col1.metric("Lower bound (SDP)", fmt_num(report.lb_sdp, 8))
    col2.metric("Upper bound (rounded)", fmt_num(report.ub, 8))
    col3.metric("Relative gap", fmt_gap(report.gap, report.gap_flagged))
    col4.metric("Rank", report.rank if report.rank >= 0 else "n/a")

    if report.closed:
        st.success("✅ Gap closed: the rounded portfolio is optimal up to the reported gap")
    elif report.portfolio is None:
        st.warning(f"⚠️ No feasible portfolio found (SDP: {report.sdp_status}, rounding: {report.round_status})")
    if not report.lb_safe and not math.isnan(report.lb_sdp):
        st.info("ℹ️ The interior-point solve did not converge; the lower bound is not certified.")

    if report.portfolio is not None:
        st.markdown("### 💼 Portfolio")
        p = report.portfolio
        st.dataframe(pd.DataFrame({
            "stock": list(p.support),
            "weight": [p.x[i] for i in p.support],
        }), hide_index=True)
        st.caption(f"Risk xᵀQx = {p.objective:.8g}, max constraint residual {p.max_residual:.1e}")

    if report.lifted is not None:
        with st.expander("🔍 Lifted matrix spectrum", expanded=False):
            eig = report.lifted.eigenvalues[::-1]
            top = eig[0] if eig.size and eig[0] > 0 else 1.0
            st.dataframe(pd.DataFrame({"eigenvalue": eig, "relative": eig / top}).head(10))
            st.caption(f"Numerical rank {report.lifted.numerical_rank} of {eig.size}")

    if report.stats is not None:
        with st.expander("🧮 Interior-point log", expanded=False):
            st.dataframe(pd.DataFrame(report.stats.history), hide_index=True)

    with st.expander("🧾 Stage log", expanded=False):
        st.dataframe(pd.DataFrame([s.to_dict() for s in report.stages]), hide_index=True)
