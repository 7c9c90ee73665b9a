import streamlit as st

from core.errors import CardSdpError
from core.instance import GenSpec, generate_instance, loads_instance


def handle_instance_source():
    """
    Instance from an uploaded canonical JSON file or from the generator.
    Returns the Instance, or None when the input is invalid.
    """
    source = st.radio("Instance source", ["🎲 Generate", "📄 Upload JSON"], horizontal=True,
                      key="instance_source")

    if source == "📄 Upload JSON":
        uploaded_file = st.file_uploader("Canonical instance file", type=["json"])
        if not uploaded_file:
            st.info("📄 Upload an instance to get started")
            return None
        name = uploaded_file.name.rsplit(".", 1)[0] if hasattr(uploaded_file, "name") else ""
        try:
            inst = loads_instance(uploaded_file.getvalue().decode("utf-8"), name=name,
                                  source=name or "upload")
        except (CardSdpError, UnicodeDecodeError) as e:
            st.error(f"❌ Error reading instance: {str(e)}")
            return None
        st.success(f"✅ Loaded {inst.name}: n={inst.n}, ℵ={inst.aleph}")
        return inst

    col1, col2, col3 = st.columns(3)
    with col1:
        n = st.number_input("Stocks n", min_value=1, max_value=60, value=8, step=1, key="gen_n")
    with col2:
        seed = st.number_input("Seed", min_value=0, value=0, step=1, key="gen_seed")
    with col3:
        quantile = st.slider("ρ quantile", min_value=0.05, max_value=0.95, value=0.5, step=0.05,
                             key="gen_quantile")
    try:
        inst = generate_instance(GenSpec(n=int(n), seed=int(seed),
                                         target_rho_quantile=float(quantile)))
    except CardSdpError as e:
        st.error(f"❌ {e}")
        return None
    st.caption(f"{inst.name}: ρ = {inst.rho:.4f}, default ℵ = {inst.aleph}")
    return inst
