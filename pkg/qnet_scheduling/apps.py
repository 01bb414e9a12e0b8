from django.apps import AppConfig
from django.utils.translation import gettext_lazy as _


class QnetSchedulingConfig(AppConfig):
    name = 'qnet_scheduling'
    verbose_name = _('Quantum network scheduling')
    default_auto_field = 'django.db.models.AutoField'
