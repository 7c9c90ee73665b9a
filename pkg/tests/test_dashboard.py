from streamlit.testing.v1 import AppTest

APP = "../main.py"


def _app():
    at = AppTest.from_file(APP, default_timeout=120)
    at.run()
    return at


def test_renders_without_errors():
    at = _app()
    assert not at.exception
    assert any(t.value.startswith("📈 CardSDP") for t in at.title)
    assert not at.button(key="solve_btn").disabled


def test_solve_generated_instance():
    at = _app()
    at.button(key="solve_btn").click().run()
    assert not at.exception
    labels = [m.label for m in at.metric]
    assert labels[:4] == ["Lower bound (SDP)", "Upper bound (rounded)", "Relative gap", "Rank"]
    assert at.session_state["report"] is not None
    assert at.session_state["report"].n == 8


def test_aleph_override_applies():
    at = _app()
    at.toggle(key="aleph_override_on").set_value(True).run()
    at.number_input(key="aleph_override").set_value(1).run()
    at.button(key="solve_btn").click().run()
    assert not at.exception
    assert at.session_state["report"].aleph == 1


def test_out_of_range_override_disables_solve():
    at = _app()
    at.number_input(key="gen_n").set_value(2).run()
    at.toggle(key="aleph_override_on").set_value(True).run()
    at.number_input(key="aleph_override").set_value(5).run()
    assert at.error
    assert at.button(key="solve_btn").disabled
