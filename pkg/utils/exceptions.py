"""
Exceções do solver de jogos Bayesianos potenciais

Todas as falhas esperadas do sistema passam por estas classes, para que a
CLI consiga mapear cada uma para um código de saída.
"""


class ConfigurationError(ValueError):
    """
    Configuração malformada, trajetória ausente ou dimensões incompatíveis

    Attributes:
        field_path: Caminho (com pontos) do campo ofensivo, quando conhecido
    """

    def __init__(self, message: str, field_path: str = None):
        super().__init__(message)
        self.field_path = field_path

    def __str__(self) -> str:
        base = super().__str__()
        if self.field_path:
            return f"{base} (campo: {self.field_path})"
        return base


class PreconditionError(ValueError):
    """Violação de pré-condição (probabilidade nula, t_b fora do horizonte, ...)"""


class InfeasibleControlError(ValueError):
    """
    Controle inviável para o modelo de bicicleta

    Attributes:
        v: Velocidade no instante da falha
        delta: Ângulo de esterçamento no instante da falha
        timestep: Índice do passo de tempo (quando levantada por rollout)
    """

    def __init__(self, message: str, v: float = None, delta: float = None, timestep: int = None):
        super().__init__(message)
        self.v = v
        self.delta = delta
        self.timestep = timestep


class SynchronizationError(RuntimeError):
    """Mensagem de vizinho ausente numa iteração do ADMM"""


class SolverStallError(RuntimeError):
    """Solver sem descida do potencial por iterações demais (aborta a simulação)"""
