from common.model import SchemeName, SchemeParams
from schemes.scheme import Scheme
from schemes.scheme_active import ActiveFeedback
from schemes.scheme_baseline import NoFeedbackBaseline
from schemes.scheme_noiseless import NoiselessSwitch
from schemes.scheme_noisy import NoisySwitch

SCHEMES: dict[SchemeName, type[Scheme]] = {
    SchemeName.NO_FEEDBACK: NoFeedbackBaseline,
    SchemeName.NOISELESS_SWITCH: NoiselessSwitch,
    SchemeName.NOISY_SWITCH: NoisySwitch,
    SchemeName.ACTIVE: ActiveFeedback,
}


def build_scheme(name: SchemeName, params: SchemeParams) -> Scheme:
    """按名称创建方案，码本由参数中的种子确定"""
    return SCHEMES[name].from_params(params)
