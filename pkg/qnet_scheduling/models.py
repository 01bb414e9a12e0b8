"""
Stored experiments: the config a sweep was run with and one row per grid
point and replication.
"""
import logging

from django.core.exceptions import ValidationError
from django.db import models, transaction
from django.utils.translation import gettext
from django.utils.translation import gettext_lazy as _

from .harness import CSV_HEADER, SweepPoint as SweepPointResult, SweepResult, generation_rate
from .policies import policy_kinds


logger = logging.getLogger(__name__)


def get_policy_choices():
    return [(kind, kind) for kind in policy_kinds()]


class ExperimentManager(models.Manager):

    @transaction.atomic
    def create_from_sweep(self, name, config, result):
        experiment = self.create(
            name=name,
            policy=result.policy or config.get('policy', ''),
            config=config,
        )
        SweepPoint.objects.bulk_create([
            SweepPoint(
                experiment=experiment,
                error=point.error or '',
                **{column: getattr(point, column) for column in CSV_HEADER}
            )
            for point in result.points
        ])
        return experiment


class Experiment(models.Model):
    name = models.CharField(
        verbose_name=_('Name'),
        max_length=255,
    )
    policy = models.CharField(
        verbose_name=_('Policy'),
        choices=get_policy_choices(),
        max_length=32,
        blank=True,
    )
    config = models.JSONField(
        verbose_name=_('Configuration'),
        help_text=_('The experiment file the sweep was run with.'),
    )
    created = models.DateTimeField(
        verbose_name=_('Created'),
        auto_now_add=True,
    )

    objects = ExperimentManager()

    class Meta:
        verbose_name = _('Experiment')
        verbose_name_plural = _('Experiments')
        ordering = ['-created']

    def __str__(self):
        return self.name

    def clean(self):
        from .forms import parse_config

        try:
            parse_config(self.config, source=self.name or gettext('experiment'))
        except ValidationError as exc:
            raise ValidationError({'config': exc.messages})

    def generation_rate(self):
        """The alpha of the stored network, or None when the config no longer validates."""
        from .forms import parse_config

        try:
            experiment = parse_config(self.config, source=self.name or gettext('experiment'))
        except ValidationError as exc:
            logger.warning('Cannot read the network of experiment %s: %s', self.pk, '; '.join(exc.messages))
            return None
        return generation_rate(experiment.sim.spec)

    def sweep_result(self):
        """Rebuilds the ``SweepResult`` the stored points came from."""
        points = tuple(
            SweepPointResult(
                error=row.error or None,
                **{column: getattr(row, column) for column in CSV_HEADER}
            )
            for row in self.points.all()
        )
        sweep = self.config.get('sweep') or {}
        return SweepResult(
            beta1_values=tuple(sorted({point.beta1 for point in points})),
            beta2_values=tuple(sorted({point.beta2 for point in points})),
            points=points,
            axes=tuple(tuple(pair) for pair in sweep.get('axes', ())),
            policy=self.policy,
            alpha=self.generation_rate(),
        )


class SweepPoint(models.Model):
    experiment = models.ForeignKey(
        Experiment,
        on_delete=models.CASCADE,
        related_name='points',
    )
    beta1 = models.FloatField()
    beta2 = models.FloatField()
    replication = models.PositiveIntegerField()
    seed = models.BigIntegerField()
    unserved1 = models.FloatField(blank=True, null=True)
    unserved2 = models.FloatField(blank=True, null=True)
    served1 = models.BigIntegerField(blank=True, null=True)
    arrived1 = models.BigIntegerField(blank=True, null=True)
    served2 = models.BigIntegerField(blank=True, null=True)
    arrived2 = models.BigIntegerField(blank=True, null=True)
    final_q_total = models.BigIntegerField(blank=True, null=True)
    final_d_total = models.BigIntegerField(blank=True, null=True)
    error = models.TextField(blank=True, default='')

    class Meta:
        verbose_name = _('Sweep point')
        verbose_name_plural = _('Sweep points')
        ordering = ['beta1', 'beta2', 'replication']

    def __str__(self):
        return '({}, {}) #{}'.format(self.beta1, self.beta2, self.replication)
