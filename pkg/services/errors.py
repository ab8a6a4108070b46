class RosenError(Exception):
    """Базовая ошибка библиотеки"""


class ParameterError(RosenError):
    """Недопустимые параметры: q, α, d, точность или токен"""


class DomainError(RosenError):
    """Точка вне интервала [ℓ_0, r_0]"""


class SingularInputError(RosenError):
    """Нулевой знаменатель"""


class InternalConsistencyError(RosenError):
    """Состояние, невозможное для корректных данных"""


class OrbitTerminated(RosenError):
    """Орбита попала в 0"""


class UnsupportedError(RosenError):
    """Комбинация параметров не поддерживается"""


class BoundaryAmbiguityWarning(UserWarning):
    """Значение слишком близко к границе цилиндра при текущей точности"""
