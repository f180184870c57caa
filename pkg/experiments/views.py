from django_filters.rest_framework import DjangoFilterBackend
from rest_framework import viewsets
from rest_framework.decorators import action
from rest_framework.response import Response

from .models import ExperimentRun
from .serializers import ExperimentRunSerializer


class ExperimentRunViewSet(viewsets.ReadOnlyModelViewSet):
    """Browse recorded pipeline runs; runs are started from the command line."""

    queryset = ExperimentRun.objects.all()
    serializer_class = ExperimentRunSerializer
    filter_backends = [DjangoFilterBackend]
    filterset_fields = ["pipeline", "status"]
    lookup_field = "run_id"

    @action(detail=True, methods=["get"])
    def manifest(self, request, run_id=None):
        """The manifest written next to the run's artifacts."""
        run = self.get_object()
        return Response(run.manifest)
