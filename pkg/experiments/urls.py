from rest_framework import routers

from .views import ExperimentRunViewSet

router = routers.DefaultRouter()
router.register(r"runs", ExperimentRunViewSet)

urlpatterns = router.urls
